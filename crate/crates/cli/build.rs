fn main() {
    for key in ["TARGET", "PROFILE"] {
        println!("cargo:rustc-env=TVDBAR_BUILD_{key}={}", std::env::var(key).unwrap_or_default());
    }
}
