fn main() {
    env_logger::init();
    std::process::exit(promptav::cli::main_entry());
}
