fn main() {
    std::process::exit(nscrit_cli::cli_main(std::env::args_os()));
}
