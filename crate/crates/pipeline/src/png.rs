use resvg::{tiny_skia, usvg};

#[derive(Debug, thiserror::Error)]
pub enum PngError {
    #[error("svg: {0}")]
    Svg(#[from] usvg::Error),
    #[error("empty canvas")]
    EmptyCanvas,
    #[error("png encoding: {0}")]
    Encode(String),
}

/// Rasterizes an SVG document at its natural size. Labels use the system
/// fonts, so pixel output may differ between machines; the SVG is the
/// reproducible artifact.
pub fn svg_to_png(svg: &[u8]) -> Result<Vec<u8>, PngError> {
    let mut opt = usvg::Options::default();
    opt.fontdb_mut().load_system_fonts();
    let tree = usvg::Tree::from_data(svg, &opt)?;
    let size = tree.size().to_int_size();
    let mut pixmap = tiny_skia::Pixmap::new(size.width(), size.height()).ok_or(PngError::EmptyCanvas)?;
    resvg::render(&tree, tiny_skia::Transform::default(), &mut pixmap.as_mut());
    pixmap.encode_png().map_err(|e| PngError::Encode(e.to_string()))
}
