// Copyright The certrom Authors.
// SPDX-License-Identifier: Apache-2.0

#ifndef CERTROM_REFERENCE_HPP
#define CERTROM_REFERENCE_HPP

#include "certrom/common.hpp"
#include "certrom/fom.hpp"
#include "certrom/kernels.hpp"
#include "certrom/sdkn.hpp"

// Single-threaded versions of the OpenMP kernels. They define the expected results for the
// parallel code paths in the tests and the baseline in the benchmark.
namespace certrom::reference
{

Matrix GramSerial(kernels::Family family, const Matrix &Xt, const Matrix &Zt);

// Columns G^{-1} c_j, one sparse triangular solve pair at a time.
Matrix SolveRepresentorsSerial(const fom::FomModel &fom, const Matrix &components);

Matrix ApplyKernelLayerSerial(const sdkn::SdknModel &model, int layer, const Matrix &Z);
Matrix ForwardBatchSerial(const sdkn::SdknModel &model, const Matrix &X);

}  // namespace certrom::reference

#endif  // CERTROM_REFERENCE_HPP
