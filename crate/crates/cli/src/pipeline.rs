//! Method application shared by `enhance` and `bench`.

use std::fs;
use std::path::{Path, PathBuf};

use scanlift::enhance::{clahe_fast, unsharp_mask, ClaheParams, UnsharpParams};
use scanlift::nn::{forward_sr, load_weights, Arch, SrModel};
use scanlift::pgm::{read_pgm, write_pgm};
use scanlift::resample::{bicubic_resize, ScaleSpec};
use scanlift::GrayImage;

use crate::args::{Method, MethodArgs};
use crate::{CliError, CliResult};

pub fn read_image(path: &Path) -> CliResult<GrayImage> {
    let bytes = fs::read(path).map_err(|e| CliError::io(path, e))?;
    read_pgm(&bytes).map_err(|e| CliError::processing(path.display().to_string(), e))
}

pub fn write_image(path: &Path, img: &GrayImage) -> CliResult<()> {
    fs::write(path, write_pgm(img)).map_err(|e| CliError::io(path, e))
}

/// A loaded model together with the file it came from.
#[derive(Debug, Clone)]
pub struct LoadedModel {
    pub model: SrModel,
    pub path: PathBuf,
}

/// Resolved parameters for every method.
#[derive(Debug, Clone)]
pub struct MethodSet {
    pub clahe: ClaheParams,
    pub unsharp: UnsharpParams,
    pub srcnn: Option<LoadedModel>,
    pub vdsr: Option<LoadedModel>,
}

impl MethodSet {
    pub fn from_args(a: &MethodArgs) -> CliResult<Self> {
        let config = |e: scanlift::Error| CliError::Config(e.to_string());
        let clahe = match a.clip_limit {
            Some(clip) => ClaheParams::new(a.window, clip, a.iterations),
            None => {
                ClaheParams::with_window(a.window).and_then(|p| ClaheParams::new(a.window, p.clip_limit, a.iterations))
            }
        }
        .map_err(config)?;
        let unsharp = UnsharpParams::new(a.radius, a.amount).map_err(config)?;
        let mut set = Self { clahe, unsharp, srcnn: None, vdsr: None };
        for path in &a.weights {
            let bytes = fs::read(path).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
            let model = load_weights(&bytes).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
            let slot = match model.arch {
                Arch::Srcnn => &mut set.srcnn,
                Arch::Vdsr => &mut set.vdsr,
            };
            if slot.is_some() {
                return Err(CliError::Config(format!("more than one {} weight file given", model.arch.name())));
            }
            *slot = Some(LoadedModel { model, path: path.clone() });
        }
        Ok(set)
    }

    pub fn model(&self, method: Method) -> CliResult<Option<&LoadedModel>> {
        let slot = match method {
            Method::Srcnn => &self.srcnn,
            Method::Vdsr => &self.vdsr,
            _ => return Ok(None),
        };
        slot.as_ref().map(Some).ok_or_else(|| {
            CliError::Config(format!("method {} needs a weight file (--weights)", method.label().to_lowercase()))
        })
    }

    /// Canonical `key=value` list, `;`-separated.
    pub fn describe(&self, method: Method, factor: usize) -> String {
        let model_file = |m: &Option<LoadedModel>| {
            m.as_ref().and_then(|m| m.path.file_name()).map(|n| n.to_string_lossy().into_owned()).unwrap_or_default()
        };
        match method {
            Method::Um => format!("radius={};amount={}", self.unsharp.radius, self.unsharp.amount),
            Method::Clahe => format!(
                "window={};clip_limit={};iterations={}",
                self.clahe.window, self.clahe.clip_limit, self.clahe.iterations
            ),
            Method::Bicubic => format!("factor={factor}"),
            Method::Srcnn => format!("factor={factor};weights={}", model_file(&self.srcnn)),
            Method::Vdsr => format!("factor={factor};weights={}", model_file(&self.vdsr)),
        }
    }

    /// Applies `method` to `img`. Bicubic and the networks first upscale by
    /// `factor` (a factor of 1 leaves the size alone).
    pub fn apply(&self, method: Method, img: &GrayImage, factor: usize) -> CliResult<GrayImage> {
        let fail = |e| CliError::processing(method.label(), e);
        let upscaled = || -> CliResult<GrayImage> {
            if factor == 1 {
                return Ok(img.clone());
            }
            let spec = ScaleSpec::from_factor(factor as f64, img.width(), img.height())
                .map_err(|e| CliError::Config(e.to_string()))?;
            Ok(bicubic_resize(img, &spec))
        };
        match method {
            Method::Um => Ok(unsharp_mask(img, &self.unsharp)),
            Method::Clahe => clahe_fast(img, &self.clahe).map_err(fail),
            Method::Bicubic => upscaled(),
            Method::Srcnn | Method::Vdsr => {
                let m = self.model(method)?.expect("neural method");
                forward_sr(&m.model, &upscaled()?).map_err(fail)
            }
        }
    }

    /// Applies `method` to an image already restored onto the target grid.
    pub fn apply_restored(&self, method: Method, restored: &GrayImage) -> CliResult<GrayImage> {
        match method {
            Method::Bicubic => Ok(restored.clone()),
            other => self.apply(other, restored, 1),
        }
    }
}
