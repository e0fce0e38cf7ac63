fn main() {
    std::process::exit(branchflow_cli::run(std::env::args_os()));
}
