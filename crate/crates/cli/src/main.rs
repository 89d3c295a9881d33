use degroot_cli::{main_with, Library};

fn main() {
    std::process::exit(main_with(&Library, std::env::args().collect()));
}
