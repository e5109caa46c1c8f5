//! Seed list syntax: comma-separated integers or inclusive ranges `a-b`.

pub fn parse_seeds(text: &str) -> Result<Vec<u64>, String> {
    let mut out = Vec::new();
    for part in text.split(',').map(str::trim).filter(|p| !p.is_empty()) {
        match part.split_once('-') {
            Some((a, b)) => {
                let a: u64 = a.trim().parse().map_err(|_| format!("bad seed range `{part}`"))?;
                let b: u64 = b.trim().parse().map_err(|_| format!("bad seed range `{part}`"))?;
                if a > b {
                    return Err(format!("empty seed range `{part}`"));
                }
                out.extend(a..=b);
            }
            None => out.push(part.parse().map_err(|_| format!("bad seed `{part}`"))?),
        }
    }
    if out.is_empty() {
        return Err("at least one seed is required".into());
    }
    Ok(out)
}
