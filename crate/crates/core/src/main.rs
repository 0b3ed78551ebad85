fn main() {
    std::process::exit(codedcache::cli::main_with_args(std::env::args_os()));
}
