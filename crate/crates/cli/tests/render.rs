use esn_fractal::{StateCloud, SweepCell, SweepResult, Symbol};
use esnfd::render::{self, MINUS_COLOR, PLUS_COLOR};

fn cell(alpha: f64, beta: f64, d_f: f64) -> SweepCell {
    SweepCell {
        alpha,
        beta,
        d_f,
        r_squared: 1.0,
        n_sv: None,
        train_accuracy: None,
        error: None,
    }
}

fn attr(tag: &str, name: &str) -> f64 {
    let key = format!(" {name}=\"");
    let start = tag.find(&key).unwrap() + key.len();
    let end = start + tag[start..].find('"').unwrap();
    tag[start..end].parse().unwrap()
}

fn luminance(hex: &str) -> f64 {
    let c = |i: usize| f64::from(u8::from_str_radix(&hex[i..i + 2], 16).unwrap());
    0.2126 * c(1) + 0.7152 * c(3) + 0.0722 * c(5)
}

#[test]
fn empty_cloud_draws_axes_only() {
    let svg = render::render_scatter(&StateCloud::empty(2), 100).unwrap();
    assert!(svg.starts_with("<svg") && svg.ends_with("</svg>\n"));
    assert!(svg.contains("<line"));
    assert!(!svg.contains("<circle"));
}

#[test]
fn two_points_land_at_scaled_coordinates() {
    let cloud =
        StateCloud::from_parts(2, vec![-1.0, -1.0, 0.5, 0.0], vec![Symbol::Minus, Symbol::Plus]).unwrap();
    let svg = render::render_scatter(&cloud, 100).unwrap();
    let minus = svg.split(&format!("fill=\"{MINUS_COLOR}\"")).nth(1).unwrap();
    let plus = svg.split(&format!("fill=\"{PLUS_COLOR}\"")).nth(1).unwrap();
    let first = |s: &str| s[s.find("<circle").unwrap()..].split('>').next().unwrap().to_string();
    let (m, p) = (first(minus), first(plus));
    // plot area [50, 550] on both axes, y pointing down
    assert_eq!((attr(&m, "cx"), attr(&m, "cy")), (50.0, 550.0));
    assert_eq!((attr(&p, "cx"), attr(&p, "cy")), (425.0, 300.0));
    assert_eq!(svg.matches("<circle").count(), 2);
}

#[test]
fn scatter_rejects_other_dimensions() {
    let err = render::render_scatter(&StateCloud::empty(3), 10).unwrap_err();
    assert!(err.to_string().contains("render requires 2 neurons"));
}

#[test]
fn scatter_stride_subsampling() {
    let n = 1000;
    let coords: Vec<f64> = (0..2 * n).map(|i| (i as f64 / (2 * n) as f64) * 1.8 - 0.9).collect();
    let labels = (0..n).map(|i| if i % 2 == 0 { Symbol::Plus } else { Symbol::Minus }).collect();
    let cloud = StateCloud::from_parts(2, coords, labels).unwrap();
    let svg = render::render_scatter(&cloud, 300).unwrap();
    // stride ceil(1000 / 300) = 4 keeps indices 0, 4, ..., 996
    assert_eq!(svg.matches("<circle").count(), 250);
    assert_eq!(svg, render::render_scatter(&cloud, 300).unwrap());
}

#[test]
fn single_cell_surface_has_legend() {
    let svg = render::render_surface(&SweepResult { cells: vec![cell(1.0, 0.45, 1.4)] }).unwrap();
    assert_eq!(svg.matches("<title>").count(), 1);
    assert!(svg.contains("class=\"legend\""));
    assert!(svg.contains(">d_f<"));
}

#[test]
fn surface_gradient_follows_beta() {
    let betas = [0.2, 0.6, 1.0, 1.4, 1.8];
    let cells = [0.5, 1.0]
        .iter()
        .flat_map(|&a| betas.iter().map(move |&b| cell(a, b, 2.0 - b / 2.0)))
        .collect();
    let svg = render::render_surface(&SweepResult { cells }).unwrap();
    for alpha in ["0.5", "1"] {
        let lum: Vec<f64> = betas
            .iter()
            .map(|b| {
                let title = format!("<title>alpha={alpha} beta={b} ");
                let line = svg.lines().find(|l| l.contains(&title)).unwrap();
                let fill = line.split("fill=\"").nth(1).unwrap();
                luminance(&fill[..7])
            })
            .collect();
        assert!(lum.windows(2).all(|w| w[0] > w[1]), "{lum:?}");
    }
}

#[test]
fn ragged_surface_is_rejected() {
    let cells = vec![cell(0.5, 0.2, 1.0), cell(0.5, 0.4, 1.0), cell(1.0, 0.2, 1.0)];
    assert!(render::render_surface(&SweepResult { cells }).is_err());
    let dup = vec![cell(0.5, 0.2, 1.0), cell(0.5, 0.2, 1.1)];
    assert!(render::render_surface(&SweepResult { cells: dup }).is_err());
}

#[test]
fn failed_cells_render_grey() {
    let mut bad = cell(1.0, 0.4, f64::NAN);
    bad.error = Some("zero occupied boxes".into());
    let svg = render::render_surface(&SweepResult { cells: vec![cell(1.0, 0.2, 1.2), bad] }).unwrap();
    assert!(svg.contains("d_f=n/a"));
    assert!(svg.contains("#cccccc"));
}
