//! Device and interconnect characteristics with arithmetic-intensity thresholds.

use serde::{Deserialize, Serialize};

use crate::{Error, Result, Scalar};

/// One binary gigabyte. Bandwidths are stored in bytes/s on a binary scale:
/// the published intensity thresholds (e.g. 484 flops/B for "600 GB/s"
/// NVLink at 312 Tflop/s) are only consistent with 2^30-byte gigabytes, so
/// the profiles deliberately deviate from SI here.
pub const GIB: f64 = 1024.0 * 1024.0 * 1024.0;

/// Link classes a transfer can be scheduled on, fastest first.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LinkClass {
    GpuMemory,
    NvLink,
    PciExpress,
    InfiniBand,
    CpuGpu,
    Ethernet,
    DiskNvme,
    DiskHdd,
}

impl LinkClass {
    pub const ALL: [LinkClass; 8] = [
        LinkClass::GpuMemory,
        LinkClass::NvLink,
        LinkClass::PciExpress,
        LinkClass::InfiniBand,
        LinkClass::CpuGpu,
        LinkClass::Ethernet,
        LinkClass::DiskNvme,
        LinkClass::DiskHdd,
    ];

    pub fn label(&self) -> &'static str {
        match self {
            LinkClass::GpuMemory => "GPU memory",
            LinkClass::NvLink => "NVLink",
            LinkClass::PciExpress => "PCI-express",
            LinkClass::InfiniBand => "InfiniBand",
            LinkClass::CpuGpu => "CPU-GPU",
            LinkClass::Ethernet => "Ethernet",
            LinkClass::DiskNvme => "Disk (NVMe)",
            LinkClass::DiskHdd => "Disk (hard drive)",
        }
    }

    fn index(&self) -> usize {
        Self::ALL.iter().position(|l| l == self).unwrap()
    }
}

impl std::str::FromStr for LinkClass {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "gpu_memory" => Ok(LinkClass::GpuMemory),
            "nvlink" => Ok(LinkClass::NvLink),
            "pci_express" => Ok(LinkClass::PciExpress),
            "infiniband" => Ok(LinkClass::InfiniBand),
            "cpu_gpu" => Ok(LinkClass::CpuGpu),
            "ethernet" => Ok(LinkClass::Ethernet),
            "disk_nvme" => Ok(LinkClass::DiskNvme),
            "disk_hdd" => Ok(LinkClass::DiskHdd),
            other => Err(Error::UnknownLink(other.to_string())),
        }
    }
}

/// Compute rate, memory capacity and combined input+output bandwidth per
/// link class for one accelerator.
#[derive(Debug, Clone, PartialEq)]
pub struct HardwareProfile<F> {
    pub name: String,
    /// Peak compute rate in flop/s.
    pub compute: F,
    /// Device memory in bytes.
    pub memory: F,
    /// Combined input+output bandwidth in bytes/s, indexed by [`LinkClass`].
    bandwidth: [F; 8],
    /// Largest tensor-parallel group reachable over the fast interconnect;
    /// `None` removes the limit (NVLink at any group size).
    pub max_node_size: Option<u64>,
    /// GPUs sharing one node, used to decide when traffic stays on NVLink.
    pub gpus_per_node: u64,
    /// Link carrying data-parallel and pipeline traffic between nodes.
    pub inter_node: LinkClass,
}

impl<F: Scalar> HardwareProfile<F> {
    pub fn bandwidth(&self, link: LinkClass) -> F {
        self.bandwidth[link.index()]
    }

    pub fn set_bandwidth(&mut self, link: LinkClass, bytes_per_s: F) {
        self.bandwidth[link.index()] = bytes_per_s;
    }

    /// Arithmetic-intensity threshold `nu_net = c_gpu / bandwidth` in flops/B.
    /// Operations above the threshold are compute-bound when overlapped.
    pub fn intensity_threshold(&self, link: LinkClass) -> F {
        self.compute / self.bandwidth(link)
    }

    /// Threshold of the inter-node link (InfiniBand in the default profile).
    pub fn inter_node_threshold(&self) -> F {
        self.intensity_threshold(self.inter_node)
    }

    /// Whether a tensor-parallel group of `n_a` devices is reachable over
    /// the fast interconnect.
    pub fn fits_node(&self, group: u64) -> bool {
        self.max_node_size.is_none_or(|max| group <= max)
    }

    /// Reference profile: A100-80GB nodes of 16 GPUs with NVSwitch,
    /// one 200 Gb/s InfiniBand connector per GPU.
    pub fn a100_80g() -> Self {
        let gib = |v: f64| F::from_f64(v * GIB).unwrap();
        HardwareProfile {
            name: "a100-80g-ib".to_string(),
            compute: F::from_f64(312e12).unwrap(),
            memory: gib(80.0),
            bandwidth: [
                gib(2039.0), // GPU memory
                gib(600.0),  // NVLink
                gib(63.0),   // PCI-express 4.0 x16
                gib(50.0),   // InfiniBand, 200 Gb/s
                gib(31.5),   // CPU-GPU (half of PCIe, shared per GPU pair)
                gib(6.25),   // Ethernet, 25 Gb/s per GPU
                gib(3.2),    // NVMe
                gib(0.1),    // hard drive
            ],
            max_node_size: Some(16),
            gpus_per_node: 16,
            inter_node: LinkClass::InfiniBand,
        }
    }

    /// Same hardware with inter-node traffic on 25 Gb/s-per-GPU Ethernet.
    pub fn ethernet_variant(&self) -> Self {
        let mut profile = self.clone();
        profile.name = "a100-80g-ethernet".to_string();
        profile.inter_node = LinkClass::Ethernet;
        profile
    }

    /// Same hardware with the 16-GPU node-size limit removed: tensor groups
    /// of any size stay on NVLink.
    pub fn unlimited_node_variant(&self) -> Self {
        let mut profile = self.clone();
        profile.name = "a100-80g-unlimited-node".to_string();
        profile.max_node_size = None;
        profile
    }

    /// Look up one of the built-in named profiles.
    pub fn named(name: &str) -> Result<Self> {
        match name {
            "a100-80g-ib" => Ok(Self::a100_80g()),
            "a100-80g-ethernet" => Ok(Self::a100_80g().ethernet_variant()),
            "a100-80g-unlimited-node" => Ok(Self::a100_80g().unlimited_node_variant()),
            other => Err(Error::UnknownProfile(other.to_string())),
        }
    }
}
