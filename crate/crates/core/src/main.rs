fn main() {
    std::process::exit(lpd::cli::cli_main(std::env::args_os()));
}
