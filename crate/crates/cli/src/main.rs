fn main() {
    std::process::exit(divkde_cli::run(std::env::args_os()));
}
