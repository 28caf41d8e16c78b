// Copyright 2026 The qloop Authors
// SPDX-License-Identifier: Apache-2.0

pub mod bench;
pub mod cli;
pub mod distort;
pub mod error;
pub mod measure;
pub mod optim;
pub mod qsim;
pub mod seed;
