fn main() {
    std::process::exit(tryinfo_cli::run(std::env::args_os()));
}
