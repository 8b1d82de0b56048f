fn main() {
    std::process::exit(kpp_lab::dispatch(std::env::args_os()));
}
