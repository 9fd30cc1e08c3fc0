fn main() {
    std::process::exit(robust_lrt::cli::main_entry());
}
