"""
Storage Service for the run and report history
"""

import logging
from typing import Any, Dict, List, Optional

from sqlalchemy import func
from sqlalchemy.orm import Session

from models.database import ReportRecord, RunRecord
from models.report import PropertyReport

logger = logging.getLogger(__name__)


class RunStorageService:
    """Service for storing and retrieving protocol runs and property reports"""

    def save_run(self, db: Session, run_data: Dict[str, Any]) -> RunRecord:
        """
        Save a protocol run to the database

        Args:
            db: Database session
            run_data: Dictionary with network, field_size, targets,
                permutation, seeds, input_spec, fidelity, transmissions
                and transcript

        Returns:
            Created RunRecord
        """
        try:
            record = RunRecord(
                network=run_data.get('network', 'network'),
                field_size=run_data['field_size'],
                targets=",".join(run_data.get('targets', [])),
                permutation=",".join(str(k) for k in run_data.get('permutation', [])),
                seed=run_data.get('seed', 0),
                code_seed=run_data.get('code_seed', 0),
                input_spec=run_data.get('input_spec', 'zero'),
                retire_early=run_data.get('retire_early', False),
                fidelity=run_data['fidelity'],
                transmissions=run_data.get('transmissions', 0),
                transcript=run_data.get('transcript', ''),
            )

            db.add(record)
            db.commit()
            db.refresh(record)

            logger.info(f"Run saved to database: {record.id}")
            return record

        except Exception as e:
            logger.error(f"Error saving run to database: {str(e)}")
            db.rollback()
            raise

    def get_run(self, db: Session, run_id: int) -> Optional[RunRecord]:
        """Get run by ID"""
        try:
            return db.query(RunRecord).filter(RunRecord.id == run_id).first()
        except Exception as e:
            logger.error(f"Error getting run {run_id}: {str(e)}")
            return None

    def list_runs(self, db: Session, skip: int = 0, limit: int = 100,
                  network: Optional[str] = None) -> List[RunRecord]:
        """Most recent runs first, optionally for one network"""
        try:
            query = db.query(RunRecord)
            if network:
                query = query.filter(RunRecord.network == network)
            return query.order_by(RunRecord.id.desc()).offset(skip).limit(limit).all()
        except Exception as e:
            logger.error(f"Error listing runs: {str(e)}")
            return []

    def delete_run(self, db: Session, run_id: int) -> bool:
        try:
            record = db.query(RunRecord).filter(RunRecord.id == run_id).first()
            if not record:
                return False
            db.delete(record)
            db.commit()
            logger.info(f"Run {run_id} deleted")
            return True
        except Exception as e:
            logger.error(f"Error deleting run {run_id}: {str(e)}")
            db.rollback()
            return False

    def run_statistics(self, db: Session) -> Dict[str, Any]:
        """Count, minimum fidelity and mean transmissions over stored runs"""
        try:
            total_runs = db.query(RunRecord).count()
            min_fidelity = db.query(func.min(RunRecord.fidelity)).scalar()
            mean_transmissions = db.query(func.avg(RunRecord.transmissions)).scalar() or 0

            networks = db.query(RunRecord.network, func.count(RunRecord.id)).group_by(RunRecord.network).all()

            return {
                'total_runs': total_runs,
                'min_fidelity': min_fidelity,
                'mean_transmissions': round(float(mean_transmissions), 2),
                'runs_per_network': {name: count for name, count in networks},
            }

        except Exception as e:
            logger.error(f"Error getting run statistics: {str(e)}")
            return {}

    def save_report(self, db: Session, report: PropertyReport) -> ReportRecord:
        try:
            record = ReportRecord(
                property=report.property,
                instance=report.instance,
                cases=report.cases,
                failure_count=len(report.failures),
                min_fidelity=report.min_fidelity,
                body=report.model_dump_json(),
            )
            db.add(record)
            db.commit()
            db.refresh(record)
            return record
        except Exception as e:
            logger.error(f"Error saving report {report.property}: {str(e)}")
            db.rollback()
            raise

    def list_reports(self, db: Session, skip: int = 0, limit: int = 100) -> List[ReportRecord]:
        try:
            return db.query(ReportRecord).order_by(ReportRecord.id.desc()).offset(skip).limit(limit).all()
        except Exception as e:
            logger.error(f"Error listing reports: {str(e)}")
            return []

    def load_report(self, record: ReportRecord) -> PropertyReport:
        return PropertyReport.model_validate_json(record.body)
