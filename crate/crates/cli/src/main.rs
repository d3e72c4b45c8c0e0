fn main() {
    let code = entropic_pfr_cli::run(std::env::args_os(), &mut std::io::stdout());
    std::process::exit(code);
}
