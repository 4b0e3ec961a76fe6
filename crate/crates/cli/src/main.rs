fn main() {
    let endpoint = std::env::var(stepdedup_cli::config::ENDPOINT_ENV).ok();
    std::process::exit(stepdedup_cli::run(std::env::args_os(), endpoint));
}
