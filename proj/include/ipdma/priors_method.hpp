#ifndef IPDMA_PRIORS_METHOD_HPP
#define IPDMA_PRIORS_METHOD_HPP

#include <string>
#include <vector>

#include "ipdma/errors.hpp"

namespace ipdma {

enum class PriorTag {
  Flat,   // gamma_k improper uniform
  HS,     // horseshoe
  SSVS,   // two-component normal mixture with inclusion indicators
  UIP,    // g_k = N
  ZS,     // g_k ~ IG(1/2, N/2)
  HG,     // g/(1+g) ~ Beta(1, a/2-1)
  HGN,    // g/(g+N) ~ Beta(1, a/2-1)
  CUIP,   // g_k = 1, f = sqrt(N)
  CZS,    // g_k ~ IG(1/2, 1/2), f = n_i p_i
  CMG,    // shrink level x tuning function
  FixedG  // Zellner prior with prespecified g (not in the shipped roster)
};

enum class ShrinkLevel { S1, S2, S3 };  // Beta(2,b), Beta(1,1), Beta(b,2) on g/(1+g)
enum class TuningKind { N, Log, Pow };  // f = n p, log(n p), n^p

// Tagged description of one prior method plus its hyperparameters.
// Immutable value type; the 20 shipped methods are listed in method_roster().
struct PriorMethod {
  PriorTag tag = PriorTag::Flat;
  double a = 4.0;                          // HG/HGN, a > 2
  ShrinkLevel shrink = ShrinkLevel::S2;    // CMG
  TuningKind tuning = TuningKind::N;       // CMG (CZS always uses N)
  double ssvs_c = 5.0;                     // SSVS eta ~ Uniform(0, c)
  double ssvs_h = 100.0;                   // SSVS slab inflation
  double fixed_g = 1.0;                    // FixedG

  static PriorMethod flat() { return {PriorTag::Flat}; }
  static PriorMethod horseshoe() { return {PriorTag::HS}; }
  static PriorMethod ssvs(double c = 5.0, double h = 100.0);
  static PriorMethod uip() { return {PriorTag::UIP}; }
  static PriorMethod zs() { return {PriorTag::ZS}; }
  static PriorMethod hg(double a);
  static PriorMethod hgn(double a);
  static PriorMethod cuip() { return {PriorTag::CUIP}; }
  static PriorMethod czs();
  static PriorMethod cmg(ShrinkLevel s, TuningKind f);
  static PriorMethod zellner(double g);

  // Roster name, e.g. "CMG-S3-pow", "HG(a=4)".
  std::string name() const;

  // Accepts roster names ("HG (a=3)" and "HG(a=3)" both work). UsageError on
  // unknown names; the message lists the roster.
  static PriorMethod parse(const std::string& name);

  bool is_g_method() const;               // any mixtures-of-g family member
  bool is_calibrated() const;             // uses Lambda* with a tuning function
  bool samples_g() const;                 // g_k is a sampled latent
  bool samples_b() const;                 // S1/S3 shape latent
  bool samples_p() const;                 // per-trial tuning fraction
  bool has_proper_g_hyperprior() const;   // ZS, CZS, HG, HGN, CMG
  TuningKind tuning_kind() const;         // CZS -> N, CUIP has fixed f

  bool operator==(const PriorMethod& o) const;
};

// The 20 method names of the shipped roster, in presentation order.
const std::vector<std::string>& method_roster();

std::string to_string(ShrinkLevel s);
std::string to_string(TuningKind k);

}  // namespace ipdma

#endif
