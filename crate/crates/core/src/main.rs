fn main() {
    std::process::exit(dht_lab::cli::run());
}
