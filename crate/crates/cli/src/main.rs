fn main() {
    std::process::exit(selftest_cli::dispatch(std::env::args_os()));
}
