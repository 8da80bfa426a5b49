fn main() {
    std::process::exit(spclab_cli::run(std::env::args_os()));
}
