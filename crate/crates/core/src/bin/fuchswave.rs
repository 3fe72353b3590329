fn main() {
    std::process::exit(fuchswave::solver::run_cli(std::env::args_os()));
}
