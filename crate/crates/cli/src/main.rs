fn main() {
    std::process::exit(disslab_cli::run(std::env::args_os()));
}
