use std::io::Write;

fn main() {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn"))
        .format(|buf, record| {
            let line = serde_json::json!({
                "event": "diagnostic",
                "level": record.level().as_str(),
                "message": record.args().to_string(),
                "meta": { "target": record.target() },
            });
            writeln!(buf, "{line}")
        })
        .init();
    std::process::exit(hippo::cli::run(std::env::args_os()));
}
