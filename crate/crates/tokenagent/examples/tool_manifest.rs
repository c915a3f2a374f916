//! Print the search tool registry two ways: the JSON config form and the
//! deterministic text manifest an agent prompt would embed.
//!
//!     cargo run --example tool_manifest

use tokenagent::hopqa::{search_registry, search_tool_spec};
use tokenagent::tool_protocol::render_tool_manifest;

fn main() -> anyhow::Result<()> {
    let registry = search_registry();
    println!("registry as JSON:");
    println!("{}", serde_json::to_string_pretty(&registry.to_config_json())?);

    println!("\nrendered manifest:");
    print!("{}", render_tool_manifest(&[search_tool_spec()])?);

    println!("\nparameter schema:");
    println!(
        "{}",
        serde_json::to_string_pretty(&search_tool_spec().parameters_schema())?
    );
    Ok(())
}
