fn main() {
    std::process::exit(tsauc_cli::run(std::env::args_os()));
}
