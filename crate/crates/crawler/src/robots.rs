//! Minimal robots.txt reading: the `Disallow` prefixes of the group that
//! applies to us.

/// Disallowed path prefixes for `agent`. A group naming a token contained in
/// the agent string wins over the `*` group. Empty `Disallow` lines allow
/// everything and are skipped.
pub fn disallowed(robots: &str, agent: &str) -> Vec<String> {
    let agent = agent.to_ascii_lowercase();
    let mut groups: Vec<(Vec<String>, Vec<String>)> = Vec::new();
    let mut in_agents = false;
    for raw in robots.lines() {
        let line = raw.split('#').next().unwrap_or("").trim();
        let Some((key, value)) = line.split_once(':') else { continue };
        let (key, value) = (key.trim().to_ascii_lowercase(), value.trim());
        match key.as_str() {
            "user-agent" => {
                if !in_agents {
                    groups.push((Vec::new(), Vec::new()));
                }
                in_agents = true;
                groups.last_mut().unwrap().0.push(value.to_ascii_lowercase());
            }
            "disallow" | "allow" => {
                in_agents = false;
                if let Some(g) = groups.last_mut() {
                    if key == "disallow" && !value.is_empty() {
                        g.1.push(value.to_string());
                    }
                }
            }
            _ => in_agents = false,
        }
    }
    let specific = groups.iter().find(|(agents, _)| agents.iter().any(|a| a != "*" && agent.contains(a.as_str())));
    let chosen = specific.or_else(|| groups.iter().find(|(agents, _)| agents.iter().any(|a| a == "*")));
    chosen.map(|(_, rules)| rules.clone()).unwrap_or_default()
}

pub fn is_allowed(disallowed: &[String], path: &str) -> bool {
    !disallowed.iter().any(|prefix| path.starts_with(prefix.as_str()))
}
