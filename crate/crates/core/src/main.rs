fn main() {
    std::process::exit(oodbench::harness::cli::main_from_env());
}
