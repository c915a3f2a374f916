//! Synthetic multi-hop question answering over a tiny knowledge base.
//!
//! An instance is a gold chain of facts e0 -r1-> e1 -r2-> … plus distractor
//! facts, a question encoding "apply r_k ∘ … ∘ r1 to e0", and a single
//! `search` tool that looks up facts by subject and optional relation.
//! The outcome reward gates exact match on format correctness: it is the
//! answer EM when both format indicators pass, and the (negative) format
//! shortfall otherwise, so episodes score exactly one of {-1, -0.5, 0, 1}.

use std::fmt::Write as _;

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::tool_protocol::{
    extract_tool_calls, Fact, ParamSpec, SemanticType, ToolRegistry, ToolResult, ToolSpec,
};
use crate::vocab::{Reserved, TokenId, Vocabulary};

pub const TOOL_OPEN: TokenId = TokenId(0);
pub const TOOL_CLOSE: TokenId = TokenId(1);
pub const OBS_OPEN: TokenId = TokenId(2);
pub const OBS_CLOSE: TokenId = TokenId(3);
pub const ANS_OPEN: TokenId = TokenId(4);
pub const ANS_CLOSE: TokenId = TokenId(5);
pub const EOS: TokenId = TokenId(6);
pub const PAD: TokenId = TokenId(7);
pub const ASK: TokenId = TokenId(8);
pub const SEARCH: TokenId = TokenId(9);

const FIRST_FREE: u32 = 10;

#[derive(Debug, Error, PartialEq)]
pub enum HopError {
    #[error("infeasible config: {0}")]
    Generation(String),
}

/// The task vocabulary: control tokens, `ask`, `search`, then entity and
/// relation symbol ranges.
#[derive(Clone, Debug)]
pub struct TaskVocab {
    vocab: Vocabulary,
    n_entities: u32,
    n_relations: u32,
}

impl TaskVocab {
    pub fn new(n_entities: u32, n_relations: u32) -> Self {
        let mut symbols: Vec<String> = [
            "<tool>", "</tool>", "<obs>", "</obs>", "<answer>", "</answer>", "<eos>", "<pad>",
            "ask", "search",
        ]
        .iter()
        .map(|s| s.to_string())
        .collect();
        for i in 0..n_entities {
            symbols.push(format!("e{i}"));
        }
        for i in 0..n_relations {
            symbols.push(format!("r{i}"));
        }
        let vocab = Vocabulary::new(
            symbols,
            Reserved {
                tool_open: TOOL_OPEN,
                tool_close: TOOL_CLOSE,
                obs_open: OBS_OPEN,
                obs_close: OBS_CLOSE,
                ans_open: ANS_OPEN,
                ans_close: ANS_CLOSE,
                eos: EOS,
                pad: PAD,
            },
        )
        .expect("task vocabulary is valid by construction");
        Self {
            vocab,
            n_entities,
            n_relations,
        }
    }

    pub fn vocab(&self) -> &Vocabulary {
        &self.vocab
    }

    pub fn size(&self) -> usize {
        self.vocab.size()
    }

    pub fn entity(&self, i: u32) -> TokenId {
        assert!(i < self.n_entities);
        TokenId(FIRST_FREE + i)
    }

    pub fn relation(&self, i: u32) -> TokenId {
        assert!(i < self.n_relations);
        TokenId(FIRST_FREE + self.n_entities + i)
    }

    pub fn is_entity(&self, t: TokenId) -> bool {
        (FIRST_FREE..FIRST_FREE + self.n_entities).contains(&t.0)
    }

    pub fn is_relation(&self, t: TokenId) -> bool {
        (FIRST_FREE + self.n_entities..FIRST_FREE + self.n_entities + self.n_relations)
            .contains(&t.0)
    }

    pub fn n_entities(&self) -> u32 {
        self.n_entities
    }

    pub fn n_relations(&self) -> u32 {
        self.n_relations
    }
}

/// The single tool of the task, mirroring a top-k document retriever.
pub fn search_tool_spec() -> ToolSpec {
    ToolSpec {
        name: "search".into(),
        description: "Look up knowledge-base facts by subject entity and optional relation; \
                      returns up to k matching (subject, relation, object) facts."
            .into(),
        parameters: vec![
            ParamSpec {
                param_name: "entity".into(),
                semantic_type: SemanticType::Entity,
                required: true,
            },
            ParamSpec {
                param_name: "relation".into(),
                semantic_type: SemanticType::Relation,
                required: false,
            },
        ],
    }
}

pub fn search_registry() -> ToolRegistry {
    ToolRegistry::new(vec![search_tool_spec()]).expect("single spec cannot clash")
}

/// Fact store with insertion order preserved; lookups are deterministic.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct KnowledgeBase {
    facts: Vec<Fact>,
}

impl KnowledgeBase {
    pub fn new(facts: Vec<Fact>) -> Self {
        Self { facts }
    }

    pub fn facts(&self) -> &[Fact] {
        &self.facts
    }

    pub fn lookup(&self, subject: TokenId, relation: Option<TokenId>) -> Vec<Fact> {
        self.facts
            .iter()
            .filter(|f| f.subject == subject && relation.map_or(true, |r| f.relation == r))
            .copied()
            .collect()
    }
}

/// Interpret search args as (entity[, relation]) and return up to `k`
/// matching facts in insertion order. Bad argument types report as a
/// failed result, never an error.
pub fn search_tool(kb: &KnowledgeBase, task: &TaskVocab, args: &[TokenId], k: usize) -> ToolResult {
    assert!(k >= 1, "top-k must be at least 1");
    let (subject, relation) = match args {
        [e] if task.is_entity(*e) => (*e, None),
        [e, r] if task.is_entity(*e) && task.is_relation(*r) => (*e, Some(*r)),
        _ => return ToolResult::failure("expected (entity[, relation]) arguments"),
    };
    let mut hits = kb.lookup(subject, relation);
    hits.truncate(k);
    if hits.is_empty() {
        ToolResult::failure("no matching facts")
    } else {
        ToolResult::hits(hits)
    }
}

/// Strict single-token exact match: 1 iff `pred` is exactly `[gold]`.
pub fn exact_match(pred: &[TokenId], gold: TokenId) -> u8 {
    u8::from(pred == [gold])
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct HopConfig {
    pub hops: u32,
    pub n_entities: u32,
    pub n_relations: u32,
    pub n_distractors: u32,
    /// Probability that a distractor subject is drawn from the gold chain,
    /// forcing the agent to use relation arguments.
    pub share_subject_prob: f64,
    /// Top-k cutoff of the search tool.
    pub top_k: usize,
}

impl Default for HopConfig {
    fn default() -> Self {
        Self {
            hops: 1,
            n_entities: 28,
            n_relations: 10,
            n_distractors: 6,
            share_subject_prob: 0.3,
            top_k: 5,
        }
    }
}

/// One generated task instance: question, gold chain, and its KB.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Instance {
    pub question_tokens: Vec<TokenId>,
    pub gold_answer: TokenId,
    pub chain: Vec<Fact>,
    pub kb: KnowledgeBase,
    pub seed: u64,
}

/// Build a gold chain plus collision-checked distractors. Deterministic
/// for a given rng state.
pub fn generate_instance<R: Rng>(
    rng: &mut R,
    task: &TaskVocab,
    cfg: &HopConfig,
    seed: u64,
) -> Result<Instance, HopError> {
    let hops = cfg.hops as usize;
    if hops == 0 {
        return Err(HopError::Generation("hops must be positive".into()));
    }
    if (cfg.n_entities as usize) < hops + 1 {
        return Err(HopError::Generation(format!(
            "need at least {} entities for {} hops, have {}",
            hops + 1,
            hops,
            cfg.n_entities
        )));
    }
    if (cfg.n_relations as usize) < hops {
        return Err(HopError::Generation(format!(
            "need at least {hops} relations, have {}",
            cfg.n_relations
        )));
    }

    // Distinct chain entities so the chain cannot loop onto itself.
    let mut entities: Vec<u32> = (0..cfg.n_entities).collect();
    for i in 0..hops + 1 {
        let j = rng.gen_range(i..entities.len());
        entities.swap(i, j);
    }
    let chain_entities: Vec<TokenId> = entities[..hops + 1]
        .iter()
        .map(|&i| task.entity(i))
        .collect();
    let relations: Vec<TokenId> = (0..hops)
        .map(|_| task.relation(rng.gen_range(0..cfg.n_relations)))
        .collect();

    let mut facts: Vec<Fact> = (0..hops)
        .map(|i| Fact {
            subject: chain_entities[i],
            relation: relations[i],
            object: chain_entities[i + 1],
        })
        .collect();
    let chain = facts.clone();

    let mut attempts = 0usize;
    let budget = 200 * (cfg.n_distractors as usize + 1);
    let mut added = 0;
    while added < cfg.n_distractors {
        attempts += 1;
        if attempts > budget {
            return Err(HopError::Generation(
                "could not place distractors without collisions".into(),
            ));
        }
        let subject = if rng.gen_bool(cfg.share_subject_prob) {
            chain_entities[rng.gen_range(0..chain_entities.len())]
        } else {
            task.entity(rng.gen_range(0..cfg.n_entities))
        };
        let relation = task.relation(rng.gen_range(0..cfg.n_relations));
        let object = task.entity(rng.gen_range(0..cfg.n_entities));
        let candidate = Fact {
            subject,
            relation,
            object,
        };
        // A distractor may never share a (subject, relation) key with the
        // gold chain, or it could reroute the question to a wrong answer.
        if chain
            .iter()
            .any(|f| f.subject == subject && f.relation == relation)
        {
            continue;
        }
        if facts.contains(&candidate) {
            continue;
        }
        facts.push(candidate);
        added += 1;
    }

    // Question reads "apply r_hops ∘ … ∘ r_1 to e0".
    let mut question = vec![ASK];
    question.extend(relations.iter().rev());
    question.push(chain_entities[0]);

    Ok(Instance {
        question_tokens: question,
        gold_answer: chain_entities[hops],
        chain,
        kb: KnowledgeBase::new(facts),
        seed,
    })
}

/// Contents of every well-formed `ANS_OPEN … ANS_CLOSE` span in a segment,
/// left to right. A reopened span abandons the unclosed one.
pub fn answer_spans(segment: &[TokenId]) -> Vec<Vec<TokenId>> {
    let mut spans = Vec::new();
    let mut open: Option<usize> = None;
    for (i, &tok) in segment.iter().enumerate() {
        if tok == ANS_OPEN {
            open = Some(i);
        } else if tok == ANS_CLOSE {
            if let Some(start) = open.take() {
                spans.push(segment[start + 1..i].to_vec());
            }
        }
    }
    spans
}

/// Maximal mask=1 runs of a trajectory: the agent's action segments.
pub fn agent_segments(tokens: &[TokenId], mask: &[u8]) -> Vec<Vec<TokenId>> {
    let mut segments = Vec::new();
    let mut current: Vec<TokenId> = Vec::new();
    for (tok, &m) in tokens.iter().zip(mask) {
        if m == 1 {
            current.push(*tok);
        } else if !current.is_empty() {
            segments.push(std::mem::take(&mut current));
        }
    }
    if !current.is_empty() {
        segments.push(current);
    }
    segments
}

/// First well-formed answer span across the agent's segments, if any.
pub fn extracted_answer(tokens: &[TokenId], mask: &[u8]) -> Option<Vec<TokenId>> {
    agent_segments(tokens, mask)
        .iter()
        .flat_map(|seg| answer_spans(seg))
        .next()
}

/// Terminal reward over a full transcript.
///
/// `r_format_a` passes iff exactly one well-formed answer span exists;
/// `r_format_t` passes iff every tool span parses cleanly (vacuously when
/// no tool markers appear). With `r_format = (r_format_a + r_format_t)/2`,
/// the reward is the answer EM when `r_format = 1` and `r_format - 1`
/// otherwise.
pub fn outcome_reward(
    tokens: &[TokenId],
    mask: &[u8],
    gold: TokenId,
    vocab: &Vocabulary,
    registry: &ToolRegistry,
) -> f64 {
    let segments = agent_segments(tokens, mask);
    let mut n_answer_spans = 0usize;
    let mut tool_format_ok = true;
    for seg in &segments {
        n_answer_spans += answer_spans(seg).len();
        if seg.contains(&TOOL_OPEN) || seg.contains(&TOOL_CLOSE) {
            if extract_tool_calls(seg, vocab, registry).is_err() {
                tool_format_ok = false;
            }
        }
    }
    let r_format_a = f64::from(n_answer_spans == 1);
    let r_format_t = f64::from(tool_format_ok);
    let r_format = (r_format_a + r_format_t) / 2.0;
    if r_format == 1.0 {
        let answer = segments
            .iter()
            .flat_map(|seg| answer_spans(seg))
            .next()
            .unwrap_or_default();
        f64::from(exact_match(&answer, gold))
    } else {
        r_format - 1.0
    }
}

/// The action segments a gold-chain walker emits: one search per hop, then
/// the answer span. Stays within the default limits for hops ≤ 2.
pub fn oracle_turns(instance: &Instance) -> Vec<Vec<TokenId>> {
    let mut turns = Vec::new();
    for fact in &instance.chain {
        turns.push(vec![
            TOOL_OPEN,
            SEARCH,
            fact.subject,
            fact.relation,
            TOOL_CLOSE,
        ]);
    }
    turns.push(vec![ANS_OPEN, instance.gold_answer, ANS_CLOSE]);
    turns
}

#[derive(Serialize, Deserialize)]
struct InstanceRecord {
    question: Vec<String>,
    gold: String,
    chain: Vec<[String; 3]>,
    facts: Vec<[String; 3]>,
    seed: u64,
}

/// One JSON line per instance, symbols rendered as strings.
pub fn instance_to_line(instance: &Instance, vocab: &Vocabulary) -> String {
    let triple = |f: &Fact| {
        [
            vocab.symbol(f.subject).to_string(),
            vocab.symbol(f.relation).to_string(),
            vocab.symbol(f.object).to_string(),
        ]
    };
    let record = InstanceRecord {
        question: vocab.decode(&instance.question_tokens),
        gold: vocab.symbol(instance.gold_answer).to_string(),
        chain: instance.chain.iter().map(triple).collect(),
        facts: instance.kb.facts().iter().map(triple).collect(),
        seed: instance.seed,
    };
    serde_json::to_string(&record).expect("instance record serializes")
}

/// Render an instance set as a JSON-lines eval file.
pub fn instances_to_jsonl(instances: &[Instance], vocab: &Vocabulary) -> String {
    let mut out = String::new();
    for inst in instances {
        let _ = writeln!(out, "{}", instance_to_line(inst, vocab));
    }
    out
}
