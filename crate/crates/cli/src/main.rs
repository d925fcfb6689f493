use clap::Parser;

fn main() {
    let _ = Args::parse();
}

#[derive(Parser)]
struct Args {}
