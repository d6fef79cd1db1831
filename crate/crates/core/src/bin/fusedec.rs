fn main() {
    fusedec::cli::main()
}
