fn main() {
    let code = posthoc_cs::harness::main_with_args(std::env::args().skip(1).collect());
    std::process::exit(code);
}
