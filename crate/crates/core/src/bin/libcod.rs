fn main() {
    std::process::exit(libcod::cli::cli_main(std::env::args_os()));
}
