fn main() {
    std::process::exit(mixed_hk::cli::main(std::env::args_os()));
}
