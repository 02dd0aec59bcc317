//! Reference values shared by several test targets, frozen from `oracles/oracle_values.py`.

#![allow(dead_code, clippy::excessive_precision)]

/// (alpha, beta, Re z, Im z, Re E, Im E)
pub const ML_POINTS: [(f64, f64, f64, f64, f64, f64); 50] = [
    (1.0, 1.0, -20.0, 0.0, 2.061153622438557828e-9, 0.0),
    (1.0, 1.0, -5.0, 0.0, 0.0067379469990854670966, 0.0),
    (1.0, 1.0, -1.0, 0.0, 0.3678794411714423216, 0.0),
    (1.0, 1.0, 0.5, 0.0, 1.6487212707001281468, 0.0),
    (1.0, 1.0, 3.0, 0.0, 20.085536923187667741, 0.0),
    (1.0, 1.0, 0.0, 20.0, 0.40808206181339198606, 0.91294525072762765438),
    (1.0, 1.0, -3.0, 4.0, -0.032542999640154784794, -0.037678977574865854771),
    (1.0, 1.0, 2.0, -2.0, -3.0749323206393588671, -6.7188496974282499713),
    (0.5, 1.0, -20.0, 0.0, 0.028174348741051319319, 0.0),
    (0.5, 1.0, -8.0, 0.0, 0.069985166200880927723, 0.0),
    (0.5, 1.0, -1.0, 0.0, 0.42758357615580700441, 0.0),
    (0.5, 1.0, 1.0, 0.0, 5.0089800807622834663, 0.0),
    (0.5, 1.0, 2.5, 0.0, 1035.8148429726229083, 0.0),
    (0.5, 1.0, 0.0, 10.0, 1.7987121981931673568e-41, 0.056705394232887594085),
    (0.5, 1.0, -6.0, 8.0, 0.034114989697731235138, 0.045031631624432458202),
    (0.5, 1.0, -14.0, -14.0, 0.020175230072529913305, -0.020123829214609384007),
    (0.5, 1.0, 1.0, 1.0, -1.1370378783511973665, 2.0268137918541950181),
    (0.5, 1.0, -0.29999999999999999, 0.0, 0.73459933456765514992, 0.0),
    (0.65, 1.0, -20.0, 0.0, 0.020206330658549445399, 0.0),
    (0.65, 1.0, -10.0, 0.0, 0.041489321543417978551, 0.0),
    (0.65, 1.0, -2.0, 0.0, 0.22494106594529704716, 0.0),
    (0.65, 1.0, 1.5, 0.0, 9.7650752666874380098, 0.0),
    (0.65, 1.0, 0.0, 12.0, -0.0016259953045563401954, 0.032755010873607618502),
    (0.65, 1.0, -12.0, 16.0, 0.011628741071532573697, 0.016264169606434868359),
    (0.65, 1.0, -18.0, -5.0, 0.020816945228019371121, -0.0059595373519526605417),
    (0.65, 1.0, 0.80000000000000004, 0.59999999999999998, 1.5620518013197609724, 2.0596265851841300648),
    (0.65, 0.65, -20.0, 0.0, 0.0006748023182893597722, 0.0),
    (0.65, 0.65, -4.0, 0.0, 0.019081774270981281039, 0.0),
    (0.65, 0.65, -1.27, 0.0, 0.14133881661140881514, 0.0),
    (0.65, 0.65, 0.0, 15.0, -0.0011363206140501627427, -0.000090514879395409246402),
    (0.65, 0.65, -10.0, 10.0, -0.000071302188507785667588, 0.0013531784597872372744),
    (0.65, 0.65, 0.5, 0.0, 1.6537748653900226766, 0.0),
    (0.35, 1.0, -20.0, 0.0, 0.035266296164502609935, 0.0),
    (0.35, 1.0, -12.0, 0.0, 0.057840081117690313148, 0.0),
    (0.35, 1.0, -5.0, 0.0, 0.13102825027961321028, 0.0),
    (0.35, 1.0, -1.0, 0.0, 0.44932897685453544612, 0.0),
    (0.35, 1.0, 0.40000000000000002, 0.0, 1.7171043546505608069, 0.0),
    (0.35, 1.0, 0.0, 20.0, 0.00083736223985494916017, 0.036112419095981386531),
    (0.35, 1.0, -16.0, 12.0, 0.028651931766669546893, 0.020856836739654726964),
    (0.35, 1.0, -7.0, -7.0, 0.051589536257735988773, -0.048135945424243046726),
    (0.35, 1.0, 0.29999999999999999, 0.29999999999999999, 1.2525068806907261261, 0.57837894842364560711),
    (0.35, 1.0, -2.0, 19.0, 0.0048565648494131145899, 0.037405277095893479028),
    (0.35, 0.35, -20.0, 0.0, 0.00060240717129237642473, 0.0),
    (0.35, 0.35, -3.0, 0.0, 0.019843029111487671799, 0.0),
    (0.35, 0.35, 0.0, 6.0, -0.0070516037761660211861, 0.0011323251391988750041),
    (0.35, 0.35, -9.0, 9.0, 0.000081385756320510221101, 0.0014792022035960036437),
    (0.35, 0.35, 0.20000000000000001, 0.0, 0.59903754777332026815, 0.0),
    (0.35, 0.35, -15.0, -1.0, 0.0010404133139613683826, -0.00013467489330073076563),
    (0.35, 0.35, -0.5, 0.0, 0.17038308557646859007, 0.0),
    (0.35, 0.35, 0.0, 1.0, -0.033416090292884783005, 0.2103933463890237074),
];

/// (Re z, Im z, Re Γ, Im Γ)
pub const GAMMA_POINTS: [(f64, f64, f64, f64); 6] = [
    (0.5, 2.0, 0.089855176706431635814, -0.06049376029288756848),
    (-3.7000000000000002, 1.2, 0.004910735090013594441, 0.0099625517191866704861),
    (8.25, -5.0, -791.39336055787983059, 1662.9727606846754016),
    (0.10000000000000001, 0.0, 9.5135076986687312858, 0.0),
    (-9.5, 0.29999999999999999, 1.4519310990928805928e-6, 1.2006401197544830895e-6),
    (2.5, 30.0, 7.4180104321317278904e-18, -2.1809028456286175289e-18),
];

/// Black-Scholes call, S = K = 100, r = 0.05, σ = 0.2, T = 1.
pub const BS_ATM_CALL: f64 = 10.450583572185566782;
pub const BS_ATM_DELTA: f64 = 0.63683065117561907122;
pub const BS_ATM_GAMMA: f64 = 0.018762017345846893919;
pub const BS_ATM_VEGA: f64 = 37.524034691693787837;
pub const BS_ATM_VANNA: f64 = -0.28143026018770340878;

/// Merton call, same contract with λ = 0.1, Y ~ N(−0.1, 0.15²), 50 terms.
pub const MERTON_CALL: f64 = 10.702427917402704365;

/// Down-and-out call S = 4050, K = 4200, B = 3800, σ = 0.14, r = 0.02, T = 0.5.
pub const BARRIER_DAO: f64 = 104.389010794444016;
pub const BARRIER_VANILLA: f64 = 113.62201761135534789;

/// τ^{β−1} E_{β,β}(−2 τ^β) at τ = 0.5 for β = 0.65 and β = 0.35.
pub const LAPLACE_ML_065: f64 = 0.17928273340944356053;
pub const LAPLACE_ML_035: f64 = 0.082441030431849542138;

/// (K, T, Black-Scholes call, Merton call) at S = 100, r = 0.05, σ = 0.2,
/// jumps λ = 0.1, Y ~ N(−0.1, 0.15²).
pub const LIMIT_GRID: [(f64, f64, f64, f64); 9] = [
    (90.0, 0.5, 13.498517482637215273, 13.647250738583592946),
    (90.0, 1.0, 16.699448408415997447, 16.920995323618483855),
    (90.0, 1.5, 19.496060749434338591, 19.767601966171211054),
    (100.0, 0.5, 6.8887285776806176538, 7.0529574180376430845),
    (100.0, 1.0, 10.450583572185566782, 10.702427917402704365),
    (100.0, 1.5, 13.442904812585331625, 13.755908055917372589),
    (110.0, 0.5, 2.9064713215924105242, 3.0322306797688276672),
    (110.0, 1.0, 6.0400881297242360373, 6.2722023270844289753),
    (110.0, 1.5, 8.8554458408634412443, 9.1656686608094491011),
];
