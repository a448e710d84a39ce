fn main() {
    std::process::exit(greenpot::harness::run_from_args(std::env::args_os()));
}
