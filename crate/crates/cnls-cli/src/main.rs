fn main() {
    println!("cnls placeholder");
}
