// Copyright 2026 The qloop Authors
// SPDX-License-Identifier: Apache-2.0

fn main() {
    std::process::exit(qloop::cli::main_with_args(std::env::args_os()));
}
