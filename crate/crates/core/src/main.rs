// Copyright 2026 The nvphase Authors
// SPDX-License-Identifier: Apache-2.0

fn main() {
    std::process::exit(nvphase::cli::run(std::env::args_os()));
}
