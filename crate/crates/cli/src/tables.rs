use ultrametriclab::group::{GroupDescriptor, GroupElement};
use ultrametriclab::kernels::{heat_estimate_ratio, heat_profile_abelian, write_heat_table};
use ultrametriclab::spectral::{self, HeisenbergSpectral, SymbolOp, Truncation};

use crate::config::{GroupChoice, SuiteConfig};
use crate::CliError;

/// Heat kernel samples over t = p^{-4}..p^4. On ℚ_p^d the table is radial,
/// `t,shell,value,estimate_ratio` for shells −4..4; on ℍ_1 it is
/// `t,x,y,z,re,im,trunc_M,trunc_K` at the identity and unit basis points.
pub fn heat_table(cfg: &SuiteConfig) -> Result<Vec<u8>, CliError> {
    cfg.validate()?;
    let p = cfg.prime_or(3);
    let alpha = match cfg.alpha.as_slice() {
        [] => 1.0,
        [a] => *a,
        _ => return Err(CliError::Invalid("heat-table takes a single α".into())),
    };
    let mut buf = Vec::new();
    match cfg.group.unwrap_or(GroupChoice::Qp) {
        GroupChoice::Qp => {
            let desc = GroupDescriptor::abelian(p, cfg.d.unwrap_or(1))?;
            let mut rows = Vec::new();
            for j in -4..=4 {
                let t = (p as f64).powi(j);
                let h = heat_profile_abelian(t, alpha, desc)?;
                for m in -4..=4 {
                    rows.push((t, m, h.shell(m), heat_estimate_ratio(&h, m)?));
                }
            }
            write_heat_table(&mut buf, &rows)?;
        }
        GroupChoice::Heisenberg => {
            if cfg.d.is_some_and(|d| d != 1) {
                return Err(CliError::Invalid("the Heisenberg heat table is implemented for d = 1 only".into()));
            }
            let trunc = Truncation::new(cfg.trunc_m.unwrap_or(3), cfg.trunc_k.unwrap_or(2));
            let sp = HeisenbergSpectral::new(p, alpha, SymbolOp::Laplacian, trunc)?;
            let desc = GroupDescriptor::heisenberg(p, 1)?;
            let points = [[0i64, 0, 0], [1, 0, 0], [0, 1, 0], [0, 0, 1]]
                .iter()
                .map(|c| GroupElement::from_ints(desc, c))
                .collect::<Result<Vec<_>, _>>()?;
            let mut rows = Vec::new();
            for j in -4..=4 {
                let t = (p as f64).powi(j);
                for g in &points {
                    rows.push((t, g.clone(), sp.heat_kernel(t, g)?));
                }
            }
            spectral::write_heat_table(&mut buf, &rows)?;
        }
        GroupChoice::Engel => {
            return Err(CliError::Invalid("heat-table supports --group qp and --group heisenberg".into()));
        }
    }
    Ok(buf)
}
