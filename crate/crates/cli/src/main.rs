fn main() {
    println!("currents");
}
