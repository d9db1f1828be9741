fn main() {
    // Die quietly when a downstream pipe closes (e.g. `lc-lab oracle | head`)
    // instead of panicking on EPIPE.
    #[cfg(unix)]
    unsafe {
        libc::signal(libc::SIGPIPE, libc::SIG_DFL);
    }
    std::process::exit(lc_lab::cli::run());
}
