fn main() {
    // Placeholder while the library takes shape; replaced by the real CLI.
    eprintln!("audit: not yet wired up");
    std::process::exit(1);
}
