use smcem::models::{simulate, KitagawaModel, ThetaKitagawa};
use smcem::smoothing::{smoother_step, SmootherVariant};
use smcem::{RngStream, Trajectory};

fn main() {
    let theta = ThetaKitagawa {
        q: 1.0,
        r: 10.0,
        x0_mean: 0.0,
        x0_var: 1.0,
    };
    let model = KitagawaModel::new(&theta).unwrap();
    let mut rng = RngStream::seed_from_u64(3);
    let (truth, obs) = simulate(&model, &mut rng, 30).unwrap();
    let rmse = |samples: &[Trajectory]| {
        let mut acc = 0.0;
        for t in 1..=30 {
            let mean: f64 =
                samples.iter().map(|s| s.state(t)[0]).sum::<f64>() / samples.len() as f64;
            acc += (mean - truth.state(t)[0]).powi(2);
        }
        (acc / 30.0_f64).sqrt()
    };
    let mut iter_mean = [0.0f64; 5];
    let mut improved = 0;
    for seed in 0..100u64 {
        let root = RngStream::seed_from_u64(4000 + seed);
        let mut conditioning = Trajectory::zeros(30, 1);
        let mut errs = Vec::new();
        for it in 0..5 {
            let out = smoother_step(
                &model,
                &obs,
                SmootherVariant::CpfBs,
                &conditioning,
                10,
                10,
                &root.substream(it),
            )
            .unwrap();
            errs.push(rmse(&out.samples));
            conditioning = out.next_conditioning;
        }
        for i in 0..5 {
            iter_mean[i] += errs[i] / 100.0;
        }
        if errs[2] <= errs[0] {
            improved += 1;
        }
    }
    println!("mean rmse per iter: {:?}", iter_mean);
    println!("err3<=err1: {improved}/100");
}
