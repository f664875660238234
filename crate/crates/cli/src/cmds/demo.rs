//! `demo-structures`: walk the three structure-function demonstrations —
//! implication chaining, ratio simplification and tree adjunction — showing
//! the symbolic computation and the tensor-product computation side by side.

use clap::Args;
use tprlab_tpr::functions::{
    adjoin_map, adjoin_tree_symbolic, adjoin_tree_tpr, chain_implications_symbolic, chain_map,
    decode_implication, decode_product_of_ratios, encode_implication_pair, encode_ratio,
    simplify_ratio_map, simplify_ratio_symbolic, Implication, Ratio, RatioExpr, CONCLUSION_ROLES,
    PREMISE_ROLES, RATIO_ROLES,
};
use tprlab_tpr::spaces::{FillerSpace, RoleSpace};
use tprlab_tpr::structure::{decode_tree, encode_tree, Structure};

use super::common::Global;
use crate::error::{CliError, Result};

#[derive(Args, Debug)]
pub struct DemoArgs {
    /// Embedding width for filler vectors.
    #[arg(long, default_value_t = 16)]
    dim_f: usize,
    /// Embedding width for role vectors.
    #[arg(long, default_value_t = 12)]
    dim_r: usize,
}

pub fn run(global: Global, args: DemoArgs) -> Result<()> {
    let seed = global.seed.unwrap_or(0);
    let err = |e: tprlab_tpr::TprError| CliError::Runtime(e.to_string());

    // --- implication chaining -------------------------------------------
    println!("== implication chaining ==");
    let p1 = Implication::new("q", "r");
    let p2 = Implication::new("r", "s");
    let symbolic = chain_implications_symbolic(&p1, &p2).map_err(err)?;
    println!("premises:   {p1}, {p2}");
    println!("symbolic:   {symbolic}");

    let fillers =
        FillerSpace::random(&["q", "r", "s"], args.dim_f, seed, true).map_err(err)?;
    let premises = RoleSpace::random(&PREMISE_ROLES, args.dim_r, seed + 1).map_err(err)?;
    let conclusion = RoleSpace::random(&CONCLUSION_ROLES, args.dim_r, seed + 2).map_err(err)?;
    let pair = encode_implication_pair(&p1, &p2, &fillers, &premises).map_err(err)?;
    let map = chain_map(&premises, &conclusion).map_err(err)?;
    let out = map.apply(&pair).map_err(err)?;
    let tpr_result = decode_implication(&out, &fillers, &conclusion).map_err(err)?;
    println!("tpr:        {tpr_result}   (one constant linear map on the pair encoding)");
    println!(
        "agreement:  {}",
        if tpr_result == symbolic { "yes" } else { "NO" }
    );

    // --- ratio simplification -------------------------------------------
    println!();
    println!("== ratio simplification ==");
    let expr = RatioExpr::RatioOfRatios(Ratio::new("6", "3"), Ratio::new("4", "2"));
    let simplified = simplify_ratio_symbolic(&expr).map_err(err)?;
    println!("input:      {expr}");
    println!("symbolic:   {simplified}");

    let digits = ["2", "3", "4", "6"];
    let rfillers = FillerSpace::random(&digits, args.dim_f, seed + 3, true).map_err(err)?;
    let rroles = RoleSpace::random(&RATIO_ROLES, args.dim_r, seed + 4).map_err(err)?;
    let enc = encode_ratio(&expr, &rfillers, &rroles).map_err(err)?;
    let rmap = simplify_ratio_map(&rroles).map_err(err)?;
    let rout = rmap.apply(&enc).map_err(err)?;
    let decoded = decode_product_of_ratios(&rout, &rfillers, &rroles).map_err(err)?;
    println!("tpr:        {decoded}   (a fixed role permutation)");
    let eval = |r: &Ratio| -> Result<f64> {
        let n: f64 = r.num.parse().map_err(|_| CliError::Runtime("bad digit".into()))?;
        let d: f64 = r.den.parse().map_err(|_| CliError::Runtime("bad digit".into()))?;
        Ok(n / d)
    };
    if let (RatioExpr::RatioOfRatios(a, b), RatioExpr::ProductOfRatios(c, d)) =
        (&expr, &decoded)
    {
        let input_value = eval(a)? / eval(b)?;
        let output_value = eval(c)? * eval(d)?;
        println!("numeric:    {input_value} vs {output_value}");
        println!(
            "agreement:  {}",
            if decoded == simplified && (input_value - output_value).abs() < 1e-12 {
                "yes"
            } else {
                "NO"
            }
        );
    }

    // --- tree adjunction --------------------------------------------------
    println!();
    println!("== tree adjunction ==");
    let host: Structure = "[Kim [hates symbols]]"
        .parse()
        .map_err(err)?;
    let adjunct = "really";
    let site = "R";
    let max_depth = 3;
    let symbolic_tree =
        adjoin_tree_symbolic(&host, adjunct, site, max_depth).map_err(err)?;
    println!("host:       {host}");
    println!("adjoin:     '{adjunct}' at site '{site}'");
    println!("symbolic:   {symbolic_tree}");

    let words = ["Kim", "hates", "symbols", "really"];
    let tfillers = FillerSpace::random(&words, args.dim_f, seed + 5, true).map_err(err)?;
    let troles = RoleSpace::tree_positions(max_depth, args.dim_r, seed + 6).map_err(err)?;
    let tenc = encode_tree(&host, &tfillers, &troles).map_err(err)?;
    // The adjunction map is affine: a role re-addressing plus one constant
    // binding for the adjunct itself.
    let _ = adjoin_map(site, &troles).map_err(err)?;
    let tout = adjoin_tree_tpr(&tenc, adjunct, site, &tfillers, &troles).map_err(err)?;
    let tdecoded = decode_tree(&tout, &tfillers, &troles).map_err(err)?;
    println!("tpr:        {tdecoded}   (role re-addressing map + constant adjunct binding)");
    println!(
        "agreement:  {}",
        if tdecoded == symbolic_tree { "yes" } else { "NO" }
    );
    Ok(())
}
