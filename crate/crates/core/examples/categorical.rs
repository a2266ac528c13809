//! Loading CSV with a schema file; categorical features are one-hot encoded
//! and their levels grouped into branches by a single shape split.
//!
//! cargo run --example categorical

use shapecart::data::{read_csv, FeatureSchema, Task};
use shapecart::induce::{fit, Hyperparams};
use shapecart::model::to_dot;

fn main() {
    let schema = FeatureSchema::parse("# weather\ncity,categorical,oslo|rome|lima|cairo|quito\ntemp,numeric\n").unwrap();
    let mut csv = String::from("city,temp,umbrella\n");
    for i in 0..200 {
        let city = ["oslo", "rome", "lima", "cairo", "quito"][i % 5];
        let temp = (i * 7 % 30) as f64;
        let wet = matches!(city, "oslo" | "quito") || (city == "rome" && temp < 10.0);
        csv.push_str(&format!("{city},{temp},{}\n", if wet { "yes" } else { "no" }));
    }
    let ds = read_csv(csv.as_bytes(), &schema, Task::Classification).unwrap();
    let m = fit(&ds, &Hyperparams { max_depth: 2, ..Hyperparams::default() }).unwrap();
    println!("accuracy {:.3}\n", m.accuracy(&ds).unwrap());
    println!("{}", to_dot(&m));
}
