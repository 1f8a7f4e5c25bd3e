fn main() {
    println!("formsim");
}
