fn main() {
    std::process::exit(smart_audit::cli::run(std::env::args_os()));
}
