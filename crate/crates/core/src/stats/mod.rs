//! Factorial statistics: least squares, Type-II ANOVA, the F upper tail and
//! bootstrap intervals.

pub mod anova;
pub mod bootstrap;
pub mod design;
pub mod linalg;
pub mod special;

pub use anova::{anova_type2, AnovaRow, AnovaTable};
pub use bootstrap::{bootstrap_contrast, ContrastRow};
pub use design::{Factor, FactorialModel, Term};
pub use linalg::{fit_ols, DesignMatrix, OlsFit};
pub use special::{f_upper_tail, regularized_beta};
