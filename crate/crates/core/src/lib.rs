//! k-LSB image steganography where the pixel order inside each nest, and the
//! nest that carries each payload chunk, are chosen by cuckoo search.

pub mod bench;
pub mod cli;
pub mod cuckoo;
pub mod image_io;
pub mod klsb;
pub mod metrics;
pub mod mp3;
pub mod rng;
pub mod stego;

pub use cuckoo::CsParams;
pub use image_io::{load_image, save_image, PixelGrid};
pub use metrics::{Objective, QualityReport};
pub use stego::{
    analyze, embed, embed_mp3, extract, EmbedConfig, EmbedMode, EmbedResult, StegoError, StegoKey,
};
