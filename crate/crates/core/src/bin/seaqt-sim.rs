fn main() {
    std::process::exit(seaqt_sim::harness::cli_main(std::env::args_os()));
}
