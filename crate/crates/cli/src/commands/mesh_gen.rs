use std::path::Path;

use clap::Subcommand;

use ductflow::mesh::{
    generate_bifurcation_with, generate_box_channel, generate_channel, write_msh, BifurcationParams,
};

use ductflow::Mesh64;

use crate::config::ChannelParams;
use crate::error::CliError;

#[derive(Subcommand, Debug)]
pub enum MeshKind {
    /// Rectangular 2D channel.
    #[command(allow_negative_numbers = true)]
    Channel {
        #[arg(long)]
        length: f64,
        #[arg(long)]
        height: f64,
        /// Cells along the channel (default: square cells).
        #[arg(long)]
        nx: Option<usize>,
        /// Cells across the channel.
        #[arg(long)]
        ny: Option<usize>,
    },
    /// Symmetric 2D Y bifurcation with two outlets.
    #[command(allow_negative_numbers = true)]
    Bifurcation {
        #[arg(long, default_value_t = 2.0)]
        trunk_length: f64,
        #[arg(long, default_value_t = 2.0)]
        branch_length: f64,
        #[arg(long, default_value_t = 1.0)]
        width: f64,
        /// Cells across the trunk half-width.
        #[arg(long, default_value_t = 4)]
        resolution: usize,
        #[arg(long, default_value_t = 30.0)]
        angle: f64,
        #[arg(long, default_value_t = 1.0)]
        width_ratio: f64,
    },
    /// 3D box channel of tetrahedra.
    #[command(allow_negative_numbers = true)]
    Box {
        #[arg(long)]
        length: f64,
        #[arg(long)]
        height: f64,
        #[arg(long)]
        depth: f64,
        #[arg(long, default_value_t = 8)]
        nx: usize,
        #[arg(long, default_value_t = 2)]
        ny: usize,
        #[arg(long, default_value_t = 2)]
        nz: usize,
    },
}

pub fn run(kind: &MeshKind, output: &Path) -> Result<(), CliError> {
    let mesh: Mesh64 = generate(kind).map_err(|e| CliError::Usage(e.to_string()))?;
    write_msh(&mesh, output)?;
    print_summary(&mesh, output);
    Ok(())
}

fn generate(kind: &MeshKind) -> ductflow::Result<Mesh64> {
    match *kind {
        MeshKind::Channel { length, height, nx, ny } => {
            let (nx, ny) = ChannelParams { length_cm: length, height_cm: height, nx, ny }.cells();
            generate_channel(length, height, nx, ny)
        }
        MeshKind::Bifurcation { trunk_length, branch_length, width, resolution, angle, width_ratio } => {
            generate_bifurcation_with(
                trunk_length,
                branch_length,
                width,
                resolution,
                BifurcationParams { angle_deg: angle, branch_width_ratio: width_ratio },
            )
        }
        MeshKind::Box { length, height, depth, nx, ny, nz } => generate_box_channel(length, height, depth, [nx, ny, nz]),
    }
}

fn print_summary(mesh: &Mesh64, output: &Path) {
    println!(
        "{}: {} vertices, {} cells, boundary tags {:?}",
        output.display(),
        mesh.num_vertices(),
        mesh.num_cells(),
        mesh.tags()
    );
}
