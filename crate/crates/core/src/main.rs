fn main() {
    std::process::exit(lesion_synth::cli::main());
}
