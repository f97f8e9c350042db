fn main() {
    std::process::exit(cohlab::cli::main_exit());
}
