// Drives the `hoqo` command line in-process and parses its JSON output.

pub struct CliSummary {
    pub span_code: i32,
    pub span_rank: u64,
    pub build_code: i32,
    pub build_value: f64,
    pub usage_code: i32,
}

fn call(args: &[&str]) -> (i32, serde_json::Value) {
    let (mut out, mut err) = (Vec::new(), Vec::new());
    let code = hoqo::cli::run(std::iter::once("hoqo").chain(args.iter().copied()), &mut out, &mut err);
    let json = serde_json::from_slice(&out).unwrap_or(serde_json::Value::Null);
    (code, json)
}

pub fn run_example() -> hoqo::Result<CliSummary> {
    let (span_code, span) = call(&["span", "--d", "2", "--k", "2"]);
    println!("hoqo span --d 2 --k 2 → exit {span_code}, rank {}", span["rank"]);

    let (build_code, built) = call(&["protocol", "build", "--f", "inv", "--mode", "det", "--d", "3", "--psi", "1,0:1,0"]);
    println!("hoqo protocol build (inv, det, d=3) → exit {build_code}, F = {}", built["value"]);

    let (usage_code, _) = call(&["protocol", "build", "--f", "swap", "--mode", "det", "--d", "3"]);
    println!("unknown target → exit {usage_code}");
    Ok(CliSummary {
        span_code,
        span_rank: span["rank"].as_u64().unwrap_or(0),
        build_code,
        build_value: built["value"].as_f64().unwrap_or(f64::NAN),
        usage_code,
    })
}

#[allow(dead_code)]
fn main() -> hoqo::Result<()> {
    run_example().map(|_| ())
}
