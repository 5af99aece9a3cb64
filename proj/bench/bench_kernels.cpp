// Copyright The certrom Authors.
// SPDX-License-Identifier: Apache-2.0

// OpenMP kernels against their serial reference implementations.

#include <random>

#include <benchmark/benchmark.h>

#include "certrom/fom.hpp"
#include "certrom/kernels.hpp"
#include "certrom/rb.hpp"
#include "certrom/reference.hpp"
#include "certrom/sdkn.hpp"

namespace
{

using namespace certrom;

Matrix RandomPoints(Eigen::Index n, Eigen::Index d, unsigned seed)
{
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  Matrix X(n, d);
  for (Eigen::Index i = 0; i < X.size(); i++)
  {
    X.data()[i] = u(rng);
  }
  return X;
}

void BM_GramParallel(benchmark::State &state)
{
  const Matrix X = RandomPoints(state.range(0), 6, 1);
  for (auto _ : state)
  {
    benchmark::DoNotOptimize(kernels::GramTransformed(kernels::Family::QuadraticMatern, X, X));
  }
}

void BM_GramSerial(benchmark::State &state)
{
  const Matrix X = RandomPoints(state.range(0), 6, 1);
  for (auto _ : state)
  {
    benchmark::DoNotOptimize(reference::GramSerial(kernels::Family::QuadraticMatern, X, X));
  }
}

struct RepresentorSetup
{
  fom::FomModel model{fom::FomSpec{}};
  rb::ReducedBasis basis;

  explicit RepresentorSetup(Eigen::Index n) : basis{RandomPoints(model.dofs(), n, 2)} {}
};

void BM_ProjectParallel(benchmark::State &state)
{
  const RepresentorSetup s(state.range(0));
  for (auto _ : state)
  {
    benchmark::DoNotOptimize(rb::ProjectOperators(s.model, s.basis, {true, true}));
  }
}

void BM_ProjectSerial(benchmark::State &state)
{
  const RepresentorSetup s(state.range(0));
  for (auto _ : state)
  {
    benchmark::DoNotOptimize(rb::ProjectOperators(s.model, s.basis, {true, false}));
  }
}

sdkn::SdknModel BenchNetwork()
{
  const Matrix X = RandomPoints(256, 6, 3);
  return sdkn::Init(sdkn::SdknArchitecture::Default(6, 400), X);
}

void BM_SdknForwardParallel(benchmark::State &state)
{
  const auto model = BenchNetwork();
  const Matrix X = RandomPoints(state.range(0), 6, 4);
  for (auto _ : state)
  {
    benchmark::DoNotOptimize(model.ForwardBatch(X));
  }
}

void BM_SdknForwardSerial(benchmark::State &state)
{
  const auto model = BenchNetwork();
  const Matrix X = RandomPoints(state.range(0), 6, 4);
  for (auto _ : state)
  {
    benchmark::DoNotOptimize(reference::ForwardBatchSerial(model, X));
  }
}

}  // namespace

BENCHMARK(BM_GramParallel)->Arg(500)->Arg(2000);
BENCHMARK(BM_GramSerial)->Arg(500)->Arg(2000);
BENCHMARK(BM_ProjectParallel)->Arg(8)->Arg(32);
BENCHMARK(BM_ProjectSerial)->Arg(8)->Arg(32);
BENCHMARK(BM_SdknForwardParallel)->Arg(256)->Arg(1024);
BENCHMARK(BM_SdknForwardSerial)->Arg(256)->Arg(1024);

BENCHMARK_MAIN();
