fn main() {
    std::process::exit(condexp::run())
}
