fn main() {
    std::process::exit(cascade_scope_cli::cli_entry(std::env::args_os()));
}
