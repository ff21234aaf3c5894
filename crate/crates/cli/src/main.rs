fn main() {
    std::process::exit(wrmlab_cli::run(std::env::args_os()));
}
