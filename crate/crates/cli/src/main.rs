fn main() {
    std::process::exit(conductance_cli::cli_run(std::env::args_os()));
}
