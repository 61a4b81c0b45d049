"""Hand-written reference values for the shipped reward programs.

Each formula is written out directly here, independent of the DSL, and the
results are frozen into reward_corpus.json.
"""
import json
import math
import random

def clip(x, lo, hi):
    return max(lo, min(hi, x))

def ind(c):
    return 1.0 if c else 0.0

def human_forward(f):
    return {
        "lin_vel": 0.02 * math.exp(-((f["vx"] - 2.0) ** 2) / 0.25),
        "ang_vel": 0.01 * math.exp(-((f["wz"] - 0.0) ** 2) / 0.25),
        "z_vel": -0.04 * f["vz"] ** 2,
        "roll_pitch": -0.001 * f["w_xy_sq"],
        "base_height": -0.6 * f["pz_err"] ** 2,
        "orientation": -0.1 * f["g_xy_sq"],
        "joint_limit": -0.2 * f["joint_limit_violation"],
        "torque": -2e-6 * f["torque_sq_sum"],
        "joint_acc": -5e-9 * f["joint_acc_sq"],
        "action_rate": -2e-4 * f["act_diff_sq"],
    }

def eureka_forward(f):
    return {
        "forward": math.exp(-((f["vx"] - 2.0) ** 2) / 2.0),
        "smooth": -0.25 * f["act_diff_l1"],
        "ang": -0.25 * f["w_norm"],
    }

def dreureka_forward(f):
    d = eureka_forward(f)
    d["torque"] = -0.002 * f["torque_sq_sum"]
    d["effort"] = -0.1 * f["act_sq"]
    return d

def globe_final(f):
    return {
        "height": 1.5 * ind(f["pz_target"] > f["pz"]) * math.exp((f["pz_target"] - f["pz"]) / 7.0),
        "balance": 2.0 * math.exp(-f["foot_ball_dist"] / 5.0),
        "smooth": -1.0 * f["act_diff_l1"],
        "large_action": -0.3 * f["act_abs"],
    }

def spin_human(f):
    return {
        "ang_vel": 1.25 * clip(f["wz"], -0.25, 0.25),
        "lin_vel": -0.3 * f["lin_vel_l1"],
        "pose": -0.1 * f["pose_diff"],
        "torque": -0.1 * f["torque_sq_sum"],
        "work": -1.0 * f["work"],
        "fall": -10.0 * ind(f["pz"] < 0.05),
    }

def spin_dreureka(f):
    a = 0.25
    w = f["wz"]
    r = a + (1.0 - math.exp(a - w)) if w > a else w
    return {
        "ang_vel": min(r, 2.5),
        "lin_vel": -3.0 * f["lin_vel_norm"],
        "fall": -5.0 * ind(f["pz"] < 0.05),
        "pose": -0.2 * f["pose_diff"],
    }

PROGRAMS = {
    ("sprint_cart", "human_forward"): (human_forward, ["vx", "wz", "vz", "w_xy_sq", "pz_err", "g_xy_sq",
        "joint_limit_violation", "torque_sq_sum", "joint_acc_sq", "act_diff_sq"]),
    ("sprint_cart", "eureka_forward"): (eureka_forward, ["vx", "act_diff_l1", "w_norm"]),
    ("sprint_cart", "dreureka_forward"): (dreureka_forward, ["vx", "act_diff_l1", "w_norm", "torque_sq_sum", "act_sq"]),
    ("globe_balance", "globe_final"): (globe_final, ["pz", "pz_target", "foot_ball_dist", "act_diff_l1", "act_abs"]),
    ("spin_disk", "spin_human"): (spin_human, ["wz", "lin_vel_l1", "pose_diff", "torque_sq_sum", "work", "pz"]),
    ("spin_disk", "spin_dreureka"): (spin_dreureka, ["wz", "lin_vel_norm", "pz", "pose_diff"]),
}

# Hand-picked points first, then random ones.
FIXED = [
    ("sprint_cart", "eureka_forward", {"vx": 2.0, "act_diff_l1": 0.0, "w_norm": 0.0}),
    ("sprint_cart", "eureka_forward", {"vx": 2.0, "act_diff_l1": 0.4, "w_norm": 0.0}),
    ("globe_balance", "globe_final", {"pz": 0.5, "pz_target": 0.5, "foot_ball_dist": 0.0, "act_diff_l1": 0.0, "act_abs": 1.0}),
    ("spin_disk", "spin_dreureka", {"wz": 0.25, "lin_vel_norm": 0.0, "pz": 0.1, "pose_diff": 0.0}),
    ("spin_disk", "spin_dreureka", {"wz": 100.0, "lin_vel_norm": 0.0, "pz": 0.1, "pose_diff": 0.0}),
    ("spin_disk", "spin_human", {"wz": 0.5, "lin_vel_l1": 0.0, "pose_diff": 0.0, "torque_sq_sum": 0.0, "work": 0.0, "pz": 0.01}),
]

def main():
    rng = random.Random(20240514)
    cases = []
    for env, name, feats in FIXED:
        cases.append((env, name, feats))
    for (env, name), (_, names) in PROGRAMS.items():
        for _ in range(20):
            feats = {}
            for n in names:
                if n in ("w_norm", "act_diff_l1", "act_abs", "act_sq", "act_diff_sq", "torque_sq_sum", "w_xy_sq",
                         "g_xy_sq", "joint_acc_sq", "joint_limit_violation", "lin_vel_l1", "lin_vel_norm",
                         "pose_diff", "work", "foot_ball_dist"):
                    feats[n] = rng.uniform(0.0, 3.0)
                elif n in ("pz", "pz_target"):
                    feats[n] = rng.uniform(0.0, 0.6)
                else:
                    feats[n] = rng.uniform(-3.0, 4.0)
            cases.append((env, name, feats))
    out = []
    for env, name, feats in cases:
        comps = PROGRAMS[(env, name)][0](feats)
        out.append({"env": env, "program": name, "features": feats, "components": comps,
                    "total": math.fsum(comps.values())})
    with open("reward_corpus.json", "w") as f:
        json.dump(out, f, indent=1)
        f.write("\n")

if __name__ == "__main__":
    main()
