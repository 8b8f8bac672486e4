//! Compares backprop against central differences on a small network, then
//! fits a toy regression with Adam.

use bowtag::neural::{Activation, Adam, AdamConfig, DenseNet, LayerSpec, LossSpec, Mode};
use ndarray::Array2;

fn main() -> bowtag::Result<()> {
    let layers = [
        LayerSpec::new(16, Activation::Relu, 0.3),
        LayerSpec::new(16, Activation::Relu, 0.0),
        LayerSpec::new(2, Activation::Sigmoid, 0.0),
    ];
    let mut net = DenseNet::<f64>::init(4, &layers, 3)?;
    for l in net.layers_mut() {
        l.bias.fill(0.05);
    }
    let x = Array2::from_shape_fn((8, 4), |(i, j)| ((i * 4 + j) as f64 * 0.37).sin());
    let y = Array2::from_shape_fn((8, 2), |(i, j)| if (i + j) % 3 == 0 { 1.0 } else { 0.0 });
    let loss = LossSpec::huber(1.0);
    // a fixed seed freezes the dropout masks across the perturbed evaluations
    let mode = Mode::Train { seed: 11 };

    let (_, grads) = net.loss_and_grad(x.view(), y.view(), loss, mode)?;
    let h = 1e-5;
    let mut worst = 0.0f64;
    for l in 0..net.layers().len() {
        let (rows, cols) = net.layers()[l].weights.dim();
        for r in 0..rows {
            for c in 0..cols {
                let orig = net.layers()[l].weights[[r, c]];
                net.layers_mut()[l].weights[[r, c]] = orig + h;
                let plus = net.loss(x.view(), y.view(), loss, mode)?;
                net.layers_mut()[l].weights[[r, c]] = orig - h;
                let minus = net.loss(x.view(), y.view(), loss, mode)?;
                net.layers_mut()[l].weights[[r, c]] = orig;
                let numeric = (plus - minus) / (2.0 * h);
                let analytic = grads.layers[l].weights[[r, c]];
                worst = worst.max((numeric - analytic).abs() / numeric.abs().max(analytic.abs()).max(1e-7));
            }
        }
    }
    println!("{} parameters, max relative error over weights {worst:.2e}", net.parameter_count());

    let mut opt = Adam::new(&net, AdamConfig::with_learning_rate(1e-2));
    for step in 0..=300u64 {
        let (value, grads) = net.loss_and_grad(x.view(), y.view(), loss, Mode::Train { seed: step })?;
        opt.step(&mut net, &grads)?;
        if step % 50 == 0 {
            println!("step {step:3}  loss {value:.5}");
        }
    }
    println!("eval-mode loss {:.5}", net.loss(x.view(), y.view(), loss, Mode::Eval)?);
    Ok(())
}
