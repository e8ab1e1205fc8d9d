fn main() {
    std::process::exit(cewb::cli::main_entry());
}
