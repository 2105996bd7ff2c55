// frame buffers are reallocated every tick
#[global_allocator]
static GLOBAL: mimalloc::MiMalloc = mimalloc::MiMalloc;

fn main() {
    std::process::exit(landpad::harness::cli::main_with_args(std::env::args_os()));
}
