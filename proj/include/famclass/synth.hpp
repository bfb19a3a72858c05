#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "famclass/common.hpp"
#include "famclass/dataset_io.hpp"

// Deterministic synthetic corpus generator for desk-scale validation: each
// family plants a disjoint signature of permissions, hardware, components,
// intent actions and API-call pairs; samples mix their family signature
// with tokens drawn from shared noise pools. Generation is a pure function
// of the SyntheticSpec, so two runs write byte-identical corpora.
//
// Label-flip noise corrupts only the labels the trainer sees: labels.tsv
// always carries the true family, and a labels_train.tsv with flipped
// entries is written alongside when the rate is nonzero. Evaluating against
// flipped ground truth would cap the measurable accuracy at 1 - rate, which
// would say nothing about the pipeline.

namespace famclass {

struct SyntheticSpec {
  std::vector<std::pair<std::string, std::size_t>> families;  // name -> sample count
  std::size_t signature_size = 10;  // signature permissions and API pairs per family
  std::size_t group_weight = 3;     // group permissions per family-signature permission
  std::vector<std::size_t> group_map;  // family -> behavior group; empty = paired default
  std::size_t noise_tokens = 64;    // size of each shared noise pool
  double signature_presence = 0.95; // per-token inclusion probability
  std::size_t noise_per_sample = 6; // noise manifest tokens per sample
  std::size_t noise_invokes = 12;   // noise API invocations per sample
  double label_flip_rate = 0.0;
  std::uint64_t seed = 42;

  // Family sizes proportioned like the ten largest families of a public
  // malware corpus (largest-remainder apportionment of 898, 665, 623, 590,
  // 338, 323, 150, 147, 75, 92 over the requested total).
  static SyntheticSpec skewed_preset(std::size_t total, std::uint64_t seed) {
    static constexpr std::size_t ref[] = {898, 665, 623, 590, 338, 323, 150, 147, 75, 92};
    std::size_t ref_total = 0;
    for (std::size_t r : ref) ref_total += r;
    SyntheticSpec spec;
    spec.seed = seed;
    std::vector<double> exact(10);
    std::vector<std::size_t> sizes(10);
    std::size_t assigned = 0;
    for (std::size_t i = 0; i < 10; ++i) {
      exact[i] = static_cast<double>(ref[i]) * static_cast<double>(total) /
                 static_cast<double>(ref_total);
      sizes[i] = static_cast<std::size_t>(exact[i]);
      assigned += sizes[i];
    }
    while (assigned < total) {
      std::size_t best = 0;
      double best_frac = -1.0;
      for (std::size_t i = 0; i < 10; ++i) {
        double frac = exact[i] - static_cast<double>(sizes[i]);
        if (frac > best_frac) {
          best_frac = frac;
          best = i;
        }
      }
      ++sizes[best];
      ++assigned;
    }
    for (std::size_t i = 0; i < 10; ++i) {
      char name[16];
      std::snprintf(name, sizeof(name), "family%02zu", i + 1);
      spec.families.emplace_back(name, sizes[i]);
    }
    return spec;
  }

  static SyntheticSpec balanced(std::size_t n_families, std::size_t per_family,
                                std::uint64_t seed) {
    SyntheticSpec spec;
    spec.seed = seed;
    for (std::size_t i = 0; i < n_families; ++i) {
      char name[16];
      std::snprintf(name, sizeof(name), "family%02zu", i + 1);
      spec.families.emplace_back(name, per_family);
    }
    return spec;
  }
};

namespace synth_detail {

struct FamilySignature {
  std::vector<std::string> perms, hw, comps, intents;
  std::vector<std::string> apis;  // signature_size APIs; pairs are cyclic (i -> i+1)
};

// Families come in behavior groups of two (SMS fraud, root kits, ...): a
// heavy token signature shared by the group plus a smaller distinct one per
// family. Clustering then recovers groups while classification still has to
// separate the families inside each cluster, which is the regime the
// adaptive ensemble targets. Pairing the largest family with the smallest
// keeps group sizes balanced under skewed family-size presets.
struct GroupSignature {
  std::vector<std::string> perms, intents;
  std::vector<std::string> apis;  // chain pairs (i -> i+1)
};

inline std::size_t group_of_family(const SyntheticSpec& spec, std::size_t f) {
  if (f < spec.group_map.size()) return spec.group_map[f];
  return std::min(f, spec.families.size() - 1 - f);
}

inline std::size_t group_count(const SyntheticSpec& spec) {
  std::size_t n = 0;
  for (std::size_t f = 0; f < spec.families.size(); ++f)
    n = std::max(n, group_of_family(spec, f) + 1);
  return n;
}

// Another family in f's group (cyclically next), or f itself when the group
// is a singleton.
inline std::size_t group_partner(const SyntheticSpec& spec, std::size_t f) {
  const std::size_t g = group_of_family(spec, f);
  const std::size_t n = spec.families.size();
  for (std::size_t step = 1; step < n; ++step) {
    std::size_t cand = (f + step) % n;
    if (group_of_family(spec, cand) == g) return cand;
  }
  return f;
}

inline FamilySignature family_signature(std::size_t f, std::size_t sig) {
  FamilySignature s;
  const std::size_t half = sig == 0 ? 0 : std::max<std::size_t>(1, sig / 2);
  for (std::size_t i = 0; i < sig; ++i)
    s.perms.push_back("synth.permission.F" + std::to_string(f) + "_" + std::to_string(i));
  for (std::size_t i = 0; i < half; ++i) {
    s.hw.push_back("android.hardware.synth.f" + std::to_string(f) + "_" + std::to_string(i));
    s.comps.push_back("com.family" + std::to_string(f) + ".SigService" + std::to_string(i));
    s.intents.push_back("synth.intent.action.F" + std::to_string(f) + "_" + std::to_string(i));
  }
  for (std::size_t i = 0; i < sig; ++i)
    s.apis.push_back("Landroid/synth/fam" + std::to_string(f) + "/Api" + std::to_string(i) +
                     ";->call()V");
  return s;
}

inline GroupSignature group_signature(std::size_t g, std::size_t sig, std::size_t weight = 3) {
  GroupSignature s;
  for (std::size_t i = 0; i < weight * sig; ++i)
    s.perms.push_back("synth.permission.G" + std::to_string(g) + "_" + std::to_string(i));
  for (std::size_t i = 0; i < sig; ++i)
    s.intents.push_back("synth.intent.action.G" + std::to_string(g) + "_" + std::to_string(i));
  for (std::size_t i = 0; i < sig + (sig > 0 ? 1 : 0); ++i)
    s.apis.push_back("Landroid/synth/grp" + std::to_string(g) + "/Api" + std::to_string(i) +
                     ";->call()V");
  return s;
}

inline std::string noise_perm(std::size_t i) { return "synth.noise.permission.N" + std::to_string(i); }
inline std::string noise_intent(std::size_t i) { return "synth.noise.action.N" + std::to_string(i); }
inline std::string noise_api(std::size_t i) {
  return "Landroid/noise/Api" + std::to_string(i) + ";->run()V";
}

// Noise APIs draw from a small pool so every noise call pair recurs across
// many samples; one-off pairs would hand boosting a way to memorize single
// rows.
inline std::size_t noise_api_pool(const SyntheticSpec& spec) {
  return std::min<std::size_t>(std::max<std::size_t>(spec.noise_tokens / 8, 8),
                               spec.noise_tokens);
}

inline std::string xml_escape(const std::string& s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '"': out += "&quot;"; break;
      default: out.push_back(c);
    }
  }
  return out;
}

}  // namespace synth_detail

// Writes a corpus in the ingest layout under `out`; fails if `out` exists
// and is non-empty. Returns the number of samples written.
inline std::size_t generate_corpus(const SyntheticSpec& spec, const std::filesystem::path& out) {
  namespace fs = std::filesystem;
  using namespace synth_detail;
  if (spec.families.empty()) throw UsageError("synthetic spec needs at least one family");
  if (fs::exists(out) && !fs::is_empty(out))
    throw ExistingNonEmptyTarget("target directory exists and is not empty: " + out.string());
  fs::create_directories(out);

  std::vector<FamilySignature> sigs;
  std::vector<GroupSignature> groups;
  for (std::size_t f = 0; f < spec.families.size(); ++f)
    sigs.push_back(family_signature(f, spec.signature_size));
  for (std::size_t g = 0; g < group_count(spec); ++g)
    groups.push_back(group_signature(g, spec.signature_size, spec.group_weight));

  std::string labels, train_labels;
  labels += "# app_id<TAB>family\n";
  train_labels += "# app_id<TAB>family (trainer view; flips applied)\n";
  bool any_flip = false;

  std::size_t global_idx = 0;
  for (std::size_t f = 0; f < spec.families.size(); ++f) {
    const auto& [fam_name, fam_count] = spec.families[f];
    const FamilySignature& sig = sigs[f];
    const GroupSignature& grp = groups[group_of_family(spec, f)];
    for (std::size_t s = 0; s < fam_count; ++s, ++global_idx) {
      Rng rng(derive_seed(spec.seed, "sample", global_idx));
      char idbuf[64];
      std::snprintf(idbuf, sizeof(idbuf), "%s_%05zu", fam_name.c_str(), s);
      std::string app_id = idbuf;
      fs::path app_dir = out / app_id;
      fs::create_directories(app_dir / "smali" / "com");

      // Manifest: signature tokens (each with inclusion probability) plus
      // shared noise permissions/actions.
      std::string mx;
      mx += "<?xml version=\"1.0\" encoding=\"utf-8\"?>\n";
      mx += "<manifest xmlns:android=\"http://schemas.android.com/apk/res/android\" package=\"com." +
            app_id + "\">\n";
      for (const auto& p : grp.perms)
        if (rng.uniform() < spec.signature_presence)
          mx += "    <uses-permission android:name=\"" + xml_escape(p) + "\"/>\n";
      for (const auto& p : sig.perms)
        if (rng.uniform() < spec.signature_presence)
          mx += "    <uses-permission android:name=\"" + xml_escape(p) + "\"/>\n";
      for (std::size_t i = 0; spec.noise_tokens > 0 && i < spec.noise_per_sample; ++i)
        mx += "    <uses-permission android:name=\"" +
              xml_escape(noise_perm(rng.bounded(spec.noise_tokens))) + "\"/>\n";
      for (const auto& h : sig.hw)
        if (rng.uniform() < spec.signature_presence)
          mx += "    <uses-feature android:name=\"" + xml_escape(h) + "\"/>\n";
      // The shared component namespace is part of the planted signal; a
      // zero-size signature must not leak group identity through it.
      const std::string grp_ns =
          spec.signature_size == 0
              ? std::string("com.app")
              : "com.synthgrp" + std::to_string(group_of_family(spec, f));
      mx += "    <application>\n";
      mx += "        <activity android:name=\"" + grp_ns + ".MainActivity\"/>\n";
      for (const auto& c : sig.comps)
        if (rng.uniform() < spec.signature_presence)
          mx += "        <service android:name=\"" + xml_escape(c) + "\"/>\n";
      mx += "        <receiver android:name=\"" + grp_ns + ".Recv\">\n";
      mx += "            <intent-filter>\n";
      for (const auto& a : grp.intents)
        if (rng.uniform() < spec.signature_presence)
          mx += "                <action android:name=\"" + xml_escape(a) + "\"/>\n";
      for (const auto& a : sig.intents)
        if (rng.uniform() < spec.signature_presence)
          mx += "                <action android:name=\"" + xml_escape(a) + "\"/>\n";
      for (std::size_t i = 0; spec.noise_tokens > 0 && i < spec.noise_per_sample / 2; ++i)
        mx += "                <action android:name=\"" +
              xml_escape(noise_intent(rng.bounded(spec.noise_tokens))) + "\"/>\n";
      mx += "            </intent-filter>\n";
      mx += "        </receiver>\n";
      mx += "    </application>\n";
      mx += "</manifest>\n";
      write_file_atomic(app_dir / "AndroidManifest.xml", mx);

      // Signature smali: one method per planted API pair (family pairs are
      // cyclic i -> i+1; group pairs form a chain).
      std::string sx;
      sx += ".class public Lcom/" + app_id + "/Sig;\n";
      sx += ".super Ljava/lang/Object;\n\n";
      std::size_t method_no = 0;
      const std::size_t n_api = sig.apis.size();
      for (std::size_t i = 0; i < n_api && n_api >= 2; ++i) {
        if (rng.uniform() >= spec.signature_presence) continue;
        const std::string& a = sig.apis[i];
        const std::string& b = sig.apis[(i + 1) % n_api];
        sx += ".method public m" + std::to_string(method_no++) + "()V\n";
        sx += "    .locals 1\n";
        sx += "    invoke-static {}, " + a + "\n";
        sx += "    invoke-static {}, " + b + "\n";
        sx += "    return-void\n";
        sx += ".end method\n\n";
      }
      for (std::size_t i = 0; i + 1 < grp.apis.size(); ++i) {
        if (rng.uniform() >= spec.signature_presence) continue;
        sx += ".method public m" + std::to_string(method_no++) + "()V\n";
        sx += "    .locals 1\n";
        sx += "    invoke-static {}, " + grp.apis[i] + "\n";
        sx += "    invoke-static {}, " + grp.apis[i + 1] + "\n";
        sx += "    return-void\n";
        sx += ".end method\n\n";
      }
      write_file_atomic(app_dir / "smali" / "com" / "Sig.smali", sx);

      // Noise smali: a run of random noise invokes (their adjacencies become
      // noise pair features).
      std::string nx;
      nx += ".class public Lcom/" + app_id + "/Noise;\n";
      nx += ".super Ljava/lang/Object;\n\n";
      nx += ".method public run()V\n";
      nx += "    .locals 1\n";
      for (std::size_t i = 0; spec.noise_tokens > 0 && i < spec.noise_invokes; ++i)
        nx += "    invoke-static {}, " + noise_api(rng.bounded(noise_api_pool(spec))) + "\n";
      nx += "    return-void\n";
      nx += ".end method\n";
      write_file_atomic(app_dir / "smali" / "com" / "Noise.smali", nx);

      labels += app_id + "\t" + fam_name + "\n";
      std::string train_fam = fam_name;
      if (spec.label_flip_rate > 0.0 && spec.families.size() > 1) {
        Rng flip_rng(derive_seed(spec.seed, "flip", global_idx));
        if (flip_rng.uniform() < spec.label_flip_rate) {
          // Mislabels confuse similar families: flip to the group partner
          // when there is one, otherwise to a uniformly random other family.
          std::size_t partner = group_partner(spec, f);
          if (partner == f) {
            partner = flip_rng.bounded(spec.families.size() - 1);
            if (partner >= f) ++partner;
          }
          train_fam = spec.families[partner].first;
          any_flip = true;
        }
      }
      train_labels += app_id + "\t" + train_fam + "\n";
    }
  }

  write_file_atomic(out / "labels.tsv", labels);
  if (spec.label_flip_rate > 0.0) {
    write_file_atomic(out / "labels_train.tsv", train_labels);
    if (any_flip)
      log_info("label-flip noise applied; trainer labels in labels_train.tsv, truth in labels.tsv");
  }
  return global_idx;
}

}  // namespace famclass
