fn main() {
    std::process::exit(srtube::cli::main_entry());
}
