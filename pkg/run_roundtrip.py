"""
Run the label-generation / reconstruction round trip.

It uses the hydra library to load the config from the config dataclasses in
configs.py. Presets can be swapped from the command line, for example
`python run_roundtrip.py postproc=ctw1500 synth.images=20`.
"""
import hydra
from omegaconf import OmegaConf

from diskchain import RoundTrip


@hydra.main(
    config_name="roundtripconfig",
    version_base="1.2",
)
def main(config):
    print("----------------- Config ---------------")
    print(OmegaConf.to_yaml(config))
    print("-----------------  End -----------------")
    config = OmegaConf.to_object(config)
    report = RoundTrip(config).run()
    print(
        f"count match {report['count_match_rate']:.3f}, "
        f"IoU pass {report['iou_pass_rate']:.3f}, mean IoU {report['mean_iou']:.3f}"
    )


if __name__ == "__main__":
    main()
