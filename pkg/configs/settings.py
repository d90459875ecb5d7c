from pydantic import Field
from pydantic_settings import BaseSettings, SettingsConfigDict


class Settings(BaseSettings):
    """アプリケーション設定

    プロセス単位の設定のみを扱う。実験ごとの設定は RunManifest に置く。
    """

    model_config = SettingsConfigDict(
        env_file=".env",
        env_file_encoding="utf-8",
        case_sensitive=False,
        # 環境変数のプレフィックス
        env_prefix="INDIC_MT_",
    )

    # アプリケーション基本設定
    app_name: str = Field(default="Indic MNMT Toolkit", description="アプリケーション名")
    app_version: str = Field(default="1.0.0", description="アプリケーションバージョン")
    debug: bool = Field(default=False, description="デバッグモード")

    # 数値計算設定
    torch_num_threads: int = Field(default=1, ge=1, description="torch の CPU スレッド数")
    deterministic: bool = Field(default=True, description="決定的アルゴリズムのみを使用する")

    # 成果物設定
    run_format_version: int = Field(default=1, description="成果物ディレクトリのフォーマットバージョン")
    metrics_filename: str = Field(default="metrics.jsonl", description="メトリクスファイル名")
    resolved_manifest_filename: str = Field(
        default="manifest.resolved.yaml",
        description="解決済みマニフェストのファイル名"
    )
    format_marker_filename: str = Field(default="FORMAT", description="フォーマットマーカーのファイル名")
    lock_filename: str = Field(default=".run.lock", description="ロックファイル名")

    # ログ設定
    log_level: str = Field(default="INFO", description="ログレベル")
    log_format: str = Field(
        default="%(asctime)s - %(name)s - %(levelname)s - %(message)s",
        description="ログフォーマット"
    )


# 設定インスタンス
settings = Settings()


def get_settings() -> Settings:
    """設定を取得する"""
    return settings
